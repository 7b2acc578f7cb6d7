// pathoquant: command-line client, batch runner, fixture generator and
// service launcher.
//
// Exit codes: 0 success, 1 I/O failure (or any failed file in batch),
// 2 server or pipeline error, 3 invalid flags or input specification.

#include <pthread.h>
#include <signal.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "pathoquant/error.hpp"
#include "pathoquant/fixture.hpp"
#include "pathoquant/service/api_client.hpp"
#include "pathoquant/service/config.hpp"
#include "pathoquant/service/pipeline.hpp"
#include "pathoquant/service/runtime.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitPipeline = 2;
constexpr int kExitUsage = 3;

struct ExitError {
  int code;
  std::string message;
};

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ExitError{kExitIo, "cannot read " + p.string()};
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, std::span<const std::uint8_t> bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ExitError{kExitIo, "cannot write " + p.string()};
}

void write_text(const fs::path& p, const std::string& text) {
  write_bytes(p, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".tif" ||
         ext == ".tiff";
}

// Flags shared by infer, batch and adjust.
struct EngineFlags {
  std::string server;
  bool local = false;
  std::string resolution = "20x";
  bool pil = false;
  pq::PostprocessParams params;
  std::optional<double> size_gate_max;

  void add(CLI::App* cmd, bool with_resolution = true) {
    cmd->add_option("--server", server, "API base URL (default: $PQ_SERVER)");
    cmd->add_flag("--local", local, "Run the pipeline in this process");
    if (with_resolution) {
      cmd->add_option("--resolution", resolution, "Magnification: 10x, 20x or 40x");
      cmd->add_flag("--pil", pil, "Use the fast decoder");
    }
    cmd->add_option("--seg-threshold", params.seg_threshold, "Foreground threshold in [0,1]");
    cmd->add_option("--size-gate-min", params.size_gate_min, "Minimum cell area (px)");
    cmd->add_option("--size-gate-max", size_gate_max, "Maximum cell area (px)");
    cmd->add_option("--marker-threshold", params.marker_threshold, "Positivity threshold in [0,1]");
  }

  // Validation happens before any file or network access.
  void finalize() {
    params.size_gate_max = size_gate_max;
    if (!pq::parse_resolution(resolution)) {
      throw ExitError{kExitUsage, "--resolution must be 10x, 20x or 40x, got '" + resolution + "'"};
    }
    try {
      params.validate();
    } catch (const pq::Error& e) {
      throw ExitError{kExitUsage, e.what()};
    }
    if (local && !server.empty()) {
      throw ExitError{kExitUsage, "--server and --local are mutually exclusive"};
    }
    if (!local && server.empty()) {
      if (const char* env = std::getenv("PQ_SERVER"); env != nullptr && *env != '\0') server = env;
    }
  }

  bool remote() const { return !server.empty(); }
};

class Engine {
 public:
  explicit Engine(const EngineFlags& flags) : flags_(flags) {
    if (flags.remote()) {
      client_.emplace(flags.server);
    } else {
      pipeline_.emplace(std::make_shared<pq::ReferenceBackend>());
    }
  }

  pq::PipelineResult infer(const fs::path& file, bool slim) const {
    const auto bytes = read_bytes(file);
    if (client_) {
      return client_->infer(bytes, file.filename().string(), flags_.resolution, flags_.params, slim,
                            flags_.pil);
    }
    const pq::RasterImage img = pipeline_->decode(bytes, flags_.pil);
    return pipeline_->process(img, *pq::parse_resolution(flags_.resolution), flags_.params, slim);
  }

  pq::PipelineResult adjust(const fs::path& seg_raw, const std::optional<fs::path>& original) const {
    const auto seg_bytes = read_bytes(seg_raw);
    std::optional<std::vector<std::uint8_t>> orig_bytes;
    if (original) orig_bytes = read_bytes(*original);
    if (client_) {
      return client_->adjust(seg_bytes, orig_bytes ? &*orig_bytes : nullptr, flags_.params);
    }
    pq::ImageLimits seg_limits;
    seg_limits.max_dim *= 2;
    const pq::RasterImage seg = pq::decode_image(seg_bytes, true, seg_limits);
    std::optional<pq::RasterImage> img;
    if (orig_bytes) img = pipeline_->decode(*orig_bytes, false);
    return pipeline_->adjust(seg, img ? &*img : nullptr, std::nullopt, flags_.params);
  }

 private:
  const EngineFlags& flags_;
  std::optional<pq::ApiClient> client_;
  std::optional<pq::Pipeline> pipeline_;
};

void write_result(const pq::PipelineResult& r, const fs::path& out_dir, const std::string& stem) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw ExitError{kExitIo, "cannot create " + out_dir.string() + ": " + ec.message()};
  for (const auto& [name, png] : r.images) {
    write_bytes(out_dir / (stem + "_" + name + ".png"), png);
  }
  write_text(out_dir / "scoring.json", pq::scoring_json(r.scoring, 2) + "\n");
}

int pipeline_exit(const pq::Error& e) {
  std::cerr << "error: " << pq::to_string(e.code()) << ": " << e.what() << "\n";
  return kExitPipeline;
}

int cmd_infer(const fs::path& file, EngineFlags& flags, bool slim, const fs::path& out_dir) {
  flags.finalize();
  if (!fs::is_regular_file(file)) throw ExitError{kExitIo, "cannot read " + file.string()};
  try {
    Engine engine(flags);
    const pq::PipelineResult r = engine.infer(file, slim);
    write_result(r, out_dir, file.stem().string());
    std::cout << pq::scoring_json(r.scoring, 2) << "\n";
    return kExitOk;
  } catch (const pq::Error& e) {
    return pipeline_exit(e);
  }
}

int cmd_adjust(const fs::path& seg_raw, const std::optional<fs::path>& original, EngineFlags& flags,
               const fs::path& out_dir) {
  flags.finalize();
  try {
    Engine engine(flags);
    const pq::PipelineResult r = engine.adjust(seg_raw, original);
    std::string stem = seg_raw.stem().string();
    if (stem.ends_with("_seg_raw")) stem.resize(stem.size() - 8);
    write_result(r, out_dir, stem);
    std::cout << pq::scoring_json(r.scoring, 2) << "\n";
    return kExitOk;
  } catch (const pq::Error& e) {
    return pipeline_exit(e);
  }
}

int cmd_batch(const fs::path& dir, EngineFlags& flags, const fs::path& csv_path, int jobs) {
  flags.finalize();
  if (jobs < 1) throw ExitError{kExitUsage, "--jobs must be >= 1"};
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw ExitError{kExitUsage, dir.string() + " is not a directory"};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  if (ec) throw ExitError{kExitIo, "cannot list " + dir.string() + ": " + ec.message()};
  if (files.empty()) throw ExitError{kExitUsage, "no supported images in " + dir.string()};
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

  std::vector<std::optional<pq::QuantResult>> results(files.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  {
    Engine engine(flags);
    std::vector<std::jthread> workers;
    const int n = std::min<int>(jobs, static_cast<int>(files.size()));
    for (int w = 0; w < n; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < files.size(); i = next.fetch_add(1)) {
          try {
            results[i] = engine.infer(files[i], true).scoring;
          } catch (const pq::Error& e) {
            std::lock_guard lock(err_mu);
            std::cerr << files[i].filename().string() << ": " << pq::to_string(e.code()) << ": "
                      << e.what() << "\n";
          } catch (const ExitError& e) {
            std::lock_guard lock(err_mu);
            std::cerr << files[i].filename().string() << ": " << e.message << "\n";
          }
        }
      });
    }
  }

  std::ostringstream csv;
  csv << "filename,num_total,num_pos,percent_pos\n";
  bool all_ok = true;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!results[i]) {
      all_ok = false;
      continue;
    }
    const auto& q = *results[i];
    csv << files[i].filename().string() << "," << q.num_total << "," << q.num_pos << ","
        << nlohmann::json(q.percent_pos).dump() << "\n";
  }
  write_text(csv_path, csv.str());
  return all_ok ? kExitOk : kExitIo;
}

struct FixtureFlags {
  std::optional<std::string> spec;
  std::vector<std::uint64_t> random;
  std::string out;
  std::optional<std::string> truth;
  pq::RandomFixtureOptions options;
};

int cmd_fixture(const FixtureFlags& f) {
  if (f.spec.has_value() == !f.random.empty()) {
    throw ExitError{kExitUsage, "give exactly one of --spec or --random K P SEED"};
  }
  pq::FixtureSpec spec;
  try {
    if (f.spec) {
      const auto bytes = read_bytes(*f.spec);
      spec = pq::parse_fixture_spec(std::string(bytes.begin(), bytes.end()));
    } else {
      const auto k = f.random[0];
      const auto p = f.random[1];
      if (k > 100000 || p > k) throw ExitError{kExitUsage, "--random needs P <= K <= 100000"};
      spec = pq::random_fixture_spec(static_cast<int>(k), static_cast<int>(p), f.random[2], f.options);
    }
  } catch (const pq::Error& e) {
    throw ExitError{kExitUsage, e.what()};
  }
  write_bytes(f.out, pq::encode_png(pq::render_fixture(spec)));
  if (f.truth) write_text(*f.truth, pq::fixture_truth_json(spec) + "\n");
  return kExitOk;
}

struct ServeFlags {
  std::optional<std::string> config;
  std::optional<std::string> host;
  std::optional<int> api_port;
  std::optional<int> web_port;
  std::optional<std::string> storage;
  std::optional<int> pool;
  std::optional<int> queue;
};

int cmd_serve(const ServeFlags& f) {
  pq::ServiceConfig cfg;
  try {
    cfg = pq::load_config(f.config ? std::optional<fs::path>(*f.config) : std::nullopt);
    if (f.host) cfg.host = *f.host;
    if (f.api_port) cfg.api_port = *f.api_port;
    if (f.web_port) cfg.web_port = *f.web_port;
    if (f.storage) cfg.storage.root = *f.storage;
    if (f.pool) cfg.pool_size = *f.pool;
    if (f.queue) cfg.queue_capacity = *f.queue;
    cfg.validate();
  } catch (const pq::Error& e) {
    throw ExitError{kExitUsage, e.what()};
  }

  // Block the signals before any thread starts so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::unique_ptr<pq::Runtime> rt;
  try {
    rt = pq::start_runtime(cfg);
  } catch (const pq::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  std::cout << "api listening on http://" << cfg.host << ":" << rt->api_port() << "\n"
            << "web listening on http://" << cfg.host << ":" << rt->web_port() << "\n"
            << "pool " << rt->pool->workers() << " workers, queue " << rt->pool->queue_capacity()
            << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  std::cout << "shutting down, draining in-flight jobs" << std::endl;
  if (!pq::stop_runtime(*rt)) {
    std::cerr << "grace period expired with jobs still running\n";
    std::_Exit(kExitPipeline);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-hosted IHC quantification: inference client, batch runner, fixtures, server"};
  app.require_subcommand(1);

  EngineFlags infer_flags;
  std::string infer_file;
  bool slim = false;
  std::string infer_out = ".";
  auto* infer = app.add_subcommand("infer", "Run one image through the pipeline");
  infer->add_option("file", infer_file, "Input image")->required();
  infer_flags.add(infer);
  infer->add_flag("--slim", slim, "Only return the segmentation image");
  infer->add_option("--out", infer_out, "Output directory");

  EngineFlags batch_flags;
  std::string batch_dir;
  std::string batch_csv;
  int batch_jobs = 1;
  auto* batch = app.add_subcommand("batch", "Score every image in a directory");
  batch->add_option("dir", batch_dir, "Input directory")->required();
  batch->add_option("--csv", batch_csv, "CSV output path")->required();
  batch->add_option("--jobs", batch_jobs, "Files processed in parallel");
  batch_flags.add(batch);

  EngineFlags adjust_flags;
  std::string adjust_seg;
  std::optional<std::string> adjust_image;
  std::string adjust_out = ".";
  auto* adjust = app.add_subcommand("adjust", "Re-run postprocessing on a seg_raw image");
  adjust->add_option("seg_raw", adjust_seg, "seg_raw PNG from a previous run")->required();
  adjust->add_option("--image", adjust_image, "Original image, for the overlay");
  adjust->add_option("--out", adjust_out, "Output directory");
  adjust_flags.add(adjust, false);

  FixtureFlags fixture_flags;
  auto* fixture = app.add_subcommand("fixture", "Render a synthetic stained-disk image");
  fixture->add_option("--spec", fixture_flags.spec, "Fixture spec JSON");
  fixture->add_option("--random", fixture_flags.random, "K P SEED")->expected(3);
  fixture->add_option("--out", fixture_flags.out, "Output PNG")->required();
  fixture->add_option("--truth", fixture_flags.truth, "Ground-truth JSON output");
  fixture->add_option("--width", fixture_flags.options.width, "Random fixture width");
  fixture->add_option("--height", fixture_flags.options.height, "Random fixture height");
  fixture->add_option("--min-radius", fixture_flags.options.min_radius, "Random disk radius lower bound");
  fixture->add_option("--max-radius", fixture_flags.options.max_radius, "Random disk radius upper bound");

  ServeFlags serve_flags;
  auto* serve = app.add_subcommand("serve", "Run the API and website services");
  serve->add_option("--config", serve_flags.config, "JSON configuration file");
  serve->add_option("--host", serve_flags.host, "Listen address");
  serve->add_option("--api-port", serve_flags.api_port, "API port (default 8000)");
  serve->add_option("--web-port", serve_flags.web_port, "Website port (default 8001)");
  serve->add_option("--storage", serve_flags.storage, "Object-store root directory");
  serve->add_option("--pool", serve_flags.pool, "Inference workers (default: cores)");
  serve->add_option("--queue", serve_flags.queue, "Queued jobs beyond the workers (default 2x pool)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*infer) return cmd_infer(infer_file, infer_flags, slim, infer_out);
    if (*batch) return cmd_batch(batch_dir, batch_flags, batch_csv, batch_jobs);
    if (*adjust) {
      return cmd_adjust(adjust_seg,
                        adjust_image ? std::optional<fs::path>(*adjust_image) : std::nullopt,
                        adjust_flags, adjust_out);
    }
    if (*fixture) return cmd_fixture(fixture_flags);
    if (*serve) return cmd_serve(serve_flags);
  } catch (const ExitError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const pq::Error& e) {
    return pipeline_exit(e);
  }
  return kExitUsage;
}
