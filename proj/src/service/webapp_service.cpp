#include "pathoquant/service/webapp_service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "pathoquant/error.hpp"
#include "pathoquant/service/base64.hpp"
#include "pathoquant/service/http_util.hpp"
#include "pathoquant/service/records.hpp"
#include "pathoquant/service/zip.hpp"

namespace fs = std::filesystem;

namespace pq {

using nlohmann::json;

namespace {

constexpr const char* kPng = "image/png";
constexpr const char* kJson = "application/json";

std::span<const std::uint8_t> bytes_of(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::optional<std::string> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string thumbnail_b64(const PngBytes& png, int max_dim) {
  const RasterImage img = decode_image(png, true, ImageLimits{6000, std::min(max_dim, 6000)});
  return base64_encode(encode_png(make_thumbnail(img, max_dim)));
}

bool wants_html(const httplib::Request& req) {
  return req.get_header_value("Accept").find("text/html") != std::string::npos;
}

std::optional<std::string> cookie_value(const httplib::Request& req, std::string_view name) {
  const std::string header = req.get_header_value("Cookie");
  std::size_t pos = 0;
  while (pos < header.size()) {
    auto end = header.find(';', pos);
    if (end == std::string::npos) end = header.size();
    std::string_view part(header.data() + pos, end - pos);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    const auto eq = part.find('=');
    if (eq != std::string_view::npos && part.substr(0, eq) == name) {
      return std::string(part.substr(eq + 1));
    }
    pos = end + 1;
  }
  return std::nullopt;
}

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
}

double display_percent(double p) { return std::round(p * 10.0) / 10.0; }

std::string scoring_csv(const QuantResult& q) {
  return "num_total,num_pos,percent_pos\n" + std::to_string(q.num_total) + "," +
         std::to_string(q.num_pos) + "," + json(q.percent_pos).dump() + "\n";
}

bool valid_sample_name(const std::string& name) {
  return is_valid_object_key(name) && name.find('/') == std::string::npos && name.front() != '.';
}

bool is_image_name(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".tif" ||
         ext == ".tiff";
}

}  // namespace

InProcessProcessor::InProcessProcessor(std::shared_ptr<const Pipeline> pipeline,
                                       std::shared_ptr<JobPool> pool)
    : pipeline_(std::move(pipeline)), pool_(std::move(pool)) {}

PipelineResult InProcessProcessor::process(const RasterImage& original, const PngBytes&,
                                           Resolution resolution,
                                           const PostprocessParams& params) {
  return pool_->run([&] { return pipeline_->process(original, resolution, params); });
}

PipelineResult InProcessProcessor::adjust(const PngBytes& seg_raw_png, const PngBytes& original_png,
                                          double scale, const PostprocessParams& params) {
  ImageLimits seg_limits = pipeline_->config().limits;
  seg_limits.max_dim *= 2;
  const RasterImage seg_raw = decode_image(seg_raw_png, true, seg_limits);
  const RasterImage original = decode_image(original_png, true, pipeline_->config().limits);
  return pipeline_->adjust(seg_raw, &original, scale, params);
}

HttpProcessor::HttpProcessor(ApiClient client) : client_(std::move(client)) {}

PipelineResult HttpProcessor::process(const RasterImage& original, const PngBytes& original_png,
                                      Resolution resolution, const PostprocessParams& params) {
  PipelineResult r =
      client_.infer(original_png, "original.png", std::string(to_string(resolution)), params);
  r.width = original.width();
  r.height = original.height();
  return r;
}

PipelineResult HttpProcessor::adjust(const PngBytes& seg_raw_png, const PngBytes& original_png,
                                     double scale, const PostprocessParams& params) {
  PipelineResult r = client_.adjust(seg_raw_png, &original_png, params);
  r.canonical_scale = scale;
  return r;
}

WebAppService::WebAppService(std::shared_ptr<ObjectStore> store,
                             std::shared_ptr<Processor> processor, WebAppOptions options)
    : store_(std::move(store)), processor_(std::move(processor)), options_(std::move(options)) {
  if (!store_ || !processor_) {
    throw Error(ErrorCode::kInvalidParameter, "website needs a store and a processor");
  }
  if (options_.ttl_seconds <= 0) throw Error(ErrorCode::kInvalidParameter, "ttl must be positive");
  options_.limits.validate();
  configure(32, 512u << 20);
  routes();
  if (options_.sweep_on_start) sweep_expired();
  sweeper_ = std::jthread([this](std::stop_token st) {
    while (true) {
      {
        std::unique_lock lock(sweep_mu_);
        sweep_cv_.wait_for(lock, st, options_.sweep_interval, [] { return false; });
      }
      if (st.stop_requested()) return;
      try {
        sweep_expired();
      } catch (const std::exception&) {
        // Storage hiccups are retried at the next interval.
      }
    }
  });
}

WebAppService::~WebAppService() {
  stop();
  sweeper_.request_stop();
  if (sweeper_.joinable()) sweeper_.join();
}

std::int64_t WebAppService::now() const {
  if (options_.clock) return options_.clock();
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::mutex& WebAppService::record_mutex(const std::string& id) const {
  return record_mutexes_[std::hash<std::string>{}(id) % record_mutexes_.size()];
}

int WebAppService::sweep_expired() {
  const std::int64_t t = now();
  int removed = 0;
  auto sweep = [&](const std::string& root, auto created_at_of) {
    for (const std::string& key : store_->list(root)) {
      if (!key.ends_with("/record.json")) continue;
      const std::string id = key.substr(root.size(), key.size() - root.size() - 12);
      if (!is_valid_record_id(id)) continue;
      std::lock_guard lock(record_mutex(id));
      std::int64_t created = 0;
      try {
        created = created_at_of(id);
      } catch (const Error&) {
        continue;
      }
      if (t - created < options_.ttl_seconds) continue;
      // Record first, so a half-swept entry is already invisible.
      store_->remove(key);
      for (const std::string& k : store_->list(root + id + "/")) store_->remove(k);
      ++removed;
    }
  };
  sweep("uploads/", [&](const std::string& id) { return load_upload(*store_, id).created_at; });
  sweep("results/", [&](const std::string& id) { return load_result(*store_, id).created_at; });
  return removed;
}

bool WebAppService::terms_accepted(const httplib::Request& req) const {
  const auto token = cookie_value(req, kSessionCookie);
  if (!token) return false;
  std::lock_guard lock(session_mu_);
  return sessions_.contains(*token);
}

bool WebAppService::gate(const httplib::Request& req, httplib::Response& res) const {
  if (terms_accepted(req)) return true;
  if (wants_html(req)) {
    res.status = 303;
    res.set_header("Location", "/terms");
  } else {
    http::send_error(res, 403, "terms_not_accepted", "accept the terms of use first");
  }
  return false;
}

json WebAppService::store_upload(const std::string& source_bytes) {
  // Full decoder for website uploads; re-encoding drops all source metadata.
  const RasterImage img = decode_image(bytes_of(source_bytes), false, options_.limits);
  const PngBytes png = encode_png(img);
  UploadRecord rec;
  rec.upload_id = http::random_token();
  rec.object_key = upload_image_key(rec.upload_id);
  rec.width = img.width();
  rec.height = img.height();
  rec.created_at = now();
  store_->put(rec.object_key, png, kPng);
  store_->put_text(upload_record_key(rec.upload_id), to_json(rec).dump(), kJson);
  return json{{"upload_id", rec.upload_id},
              {"thumbnail",
               base64_encode(encode_png(make_thumbnail(img, options_.limits.thumbnail_max_dim)))},
              {"width", rec.width},
              {"height", rec.height}};
}

json WebAppService::result_page(const std::string& result_id) const {
  const ResultRecord rec = load_result(*store_, result_id);
  json thumbs = json::object();
  for (const auto& [name, key] : rec.image_keys) {
    thumbs[name] = thumbnail_b64(store_->get(key).bytes, options_.limits.thumbnail_max_dim);
  }
  const QuantResult& q = rec.scoring;
  return json{{"result_id", rec.result_id},
              {"upload_id", rec.upload_id},
              {"resolution", to_string(rec.resolution)},
              {"width", rec.width},
              {"height", rec.height},
              {"params", http::params_to_json(rec.params)},
              {"scoring", http::scoring_to_json(q)},
              {"display",
               {{"num_total", q.num_total},
                {"num_pos", q.num_pos},
                {"percent_pos", display_percent(q.percent_pos)}}},
              {"thumbnails", thumbs},
              {"created_at", rec.created_at}};
}

void WebAppService::routes() {
  auto static_page = [this](const char* file, const char* fallback) {
    return [this, file, fallback](const httplib::Request&, httplib::Response& res) {
      const auto body = read_file(options_.web_root / file);
      res.set_content(body.value_or(fallback), "text/html; charset=utf-8");
    };
  };
  server_.Get("/", static_page("index.html",
                               "<!doctype html><title>pathoquant</title><p>Web UI not installed."));
  server_.Get("/terms", static_page("terms.html",
                                    "<!doctype html><title>Terms of Use</title><p>Terms of Use "
                                    "placeholder.<form method=post action=/terms/accept>"
                                    "<button>Accept</button></form>"));
  if (!options_.web_root.empty() && fs::is_directory(options_.web_root)) {
    server_.set_mount_point("/static", options_.web_root);
  }

  server_.Post("/terms/accept", [this](const httplib::Request& req, httplib::Response& res) {
    std::string token;
    {
      std::lock_guard lock(session_mu_);
      const auto existing = cookie_value(req, kSessionCookie);
      if (existing && sessions_.contains(*existing)) {
        token = *existing;
      } else {
        token = http::random_token();
        sessions_.insert(token);
      }
    }
    // No Max-Age/Expires: acceptance lasts as long as the browser session.
    res.set_header("Set-Cookie",
                   std::string(kSessionCookie) + "=" + token + "; Path=/; HttpOnly; SameSite=Lax");
    if (wants_html(req)) {
      res.status = 303;
      res.set_header("Location", "/");
    } else {
      http::send_json(res, json{{"terms_accepted", true}});
    }
  });

  server_.Post("/upload", [this](const httplib::Request& req, httplib::Response& res) {
    if (!gate(req, res)) return;
    http::guarded(res, [&] {
      if (!req.is_multipart_form_data() || !req.has_file("img")) {
        throw Error(ErrorCode::kInvalidParameter, "multipart file part 'img' is required");
      }
      http::send_json(res, store_upload(req.get_file_value("img").content));
    });
  });

  server_.Get("/samples", [this](const httplib::Request&, httplib::Response& res) {
    http::guarded(res, [&] {
      std::vector<std::string> names;
      std::error_code ec;
      for (const auto& entry : fs::directory_iterator(options_.sample_dir, ec)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && is_image_name(entry.path()) && valid_sample_name(name)) {
          names.push_back(name);
        }
      }
      std::sort(names.begin(), names.end());
      http::send_json(res, json{{"samples", names}});
    });
  });

  server_.Get(R"(/sample/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    if (!gate(req, res)) return;
    http::guarded(res, [&] {
      const std::string name = req.matches[1];
      if (!valid_sample_name(name)) throw Error(ErrorCode::kNotFound, "unknown sample");
      const auto bytes = read_file(options_.sample_dir / name);
      if (!bytes) throw Error(ErrorCode::kNotFound, "unknown sample '" + name + "'");
      // Samples go through exactly the upload path; nothing is precomputed.
      http::send_json(res, store_upload(*bytes));
    });
  });

  server_.Post("/process", [this](const httplib::Request& req, httplib::Response& res) {
    if (!gate(req, res)) return;
    http::guarded(res, [&] {
      const auto body = http::json_body(req);
      const json* b = body ? &*body : nullptr;
      const auto upload_id = http::field(req, "upload_id", b);
      if (!upload_id) throw Error(ErrorCode::kInvalidParameter, "upload_id is required");
      const std::string res_text = http::field(req, "resolution", b).value_or("20x");
      const auto resolution = parse_resolution(res_text);
      if (!resolution) {
        throw Error(ErrorCode::kInvalidParameter,
                    "resolution must be 10x, 20x or 40x, got '" + res_text + "'");
      }
      const PostprocessParams params = http::parse_postprocess_params(req, b);

      const UploadRecord upload = load_upload(*store_, *upload_id);
      const PngBytes original_png = store_->get(upload.object_key).bytes;
      const RasterImage original = decode_image(original_png, true, options_.limits);
      const PipelineResult result = processor_->process(original, original_png, *resolution, params);

      ResultRecord rec;
      rec.result_id = http::random_token();
      rec.upload_id = upload.upload_id;
      rec.resolution = *resolution;
      rec.canonical_scale = canonical_scale(*resolution);
      rec.width = original.width();
      rec.height = original.height();
      rec.params = params;
      rec.scoring = result.scoring;
      rec.created_at = now();
      json thumbs = json::object();
      auto save = [&](const std::string& name, const PngBytes& png) {
        const std::string key = result_image_key(rec.result_id, name);
        store_->put(key, png, kPng);
        rec.image_keys[name] = key;
        thumbs[name] = thumbnail_b64(png, options_.limits.thumbnail_max_dim);
      };
      save("original", original_png);
      for (const char* name : kResultImageNames) {
        auto it = result.images.find(name);
        if (it == result.images.end()) {
          throw Error(ErrorCode::kInternal, std::string("pipeline did not return ") + name);
        }
        save(name, it->second);
      }
      store_->put_text(result_record_key(rec.result_id), to_json(rec).dump(), kJson);
      http::send_json(res, json{{"result_id", rec.result_id},
                                {"thumbnails", thumbs},
                                {"scoring", http::scoring_to_json(rec.scoring)}});
    });
  });

  server_.Get(R"(/results/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    http::guarded(res, [&] { http::send_json(res, result_page(req.matches[1])); });
  });

  server_.Get(R"(/results/([^/]+)/images/([a-z0-9_]+)\.png)",
              [this](const httplib::Request& req, httplib::Response& res) {
                http::guarded(res, [&] {
                  const std::string id = req.matches[1];
                  std::lock_guard lock(record_mutex(id));
                  const ResultRecord rec = load_result(*store_, id);
                  const auto it = rec.image_keys.find(req.matches[2]);
                  if (it == rec.image_keys.end()) throw Error(ErrorCode::kNotFound, "no such image");
                  const auto obj = store_->get(it->second);
                  res.set_content(reinterpret_cast<const char*>(obj.bytes.data()), obj.bytes.size(),
                                  kPng);
                });
              });

  server_.Get(R"(/download/([^/]+)\.zip)", [this](const httplib::Request& req,
                                                  httplib::Response& res) {
    http::guarded(res, [&] {
      const std::string id = req.matches[1];
      std::vector<ZipEntry> entries;
      {
        std::lock_guard lock(record_mutex(id));
        const ResultRecord rec = load_result(*store_, id);
        for (const auto& [name, key] : rec.image_keys) {
          entries.push_back({name + ".png", store_->get(key).bytes});
        }
        const std::string sj = scoring_json(rec.scoring, 2) + "\n";
        const std::string sc = scoring_csv(rec.scoring);
        entries.push_back({"scoring.json", {sj.begin(), sj.end()}});
        entries.push_back({"scoring.csv", {sc.begin(), sc.end()}});
      }
      const auto zip = write_zip(std::move(entries));
      res.set_header("Content-Disposition", "attachment; filename=\"" + id + ".zip\"");
      res.set_content(reinterpret_cast<const char*>(zip.data()), zip.size(), "application/zip");
    });
  });

  server_.Post(R"(/adjust/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    if (!gate(req, res)) return;
    http::guarded(res, [&] {
      const std::string id = req.matches[1];
      const auto body = http::json_body(req);
      const json* b = body ? &*body : nullptr;
      std::lock_guard lock(record_mutex(id));
      ResultRecord rec = load_result(*store_, id);
      const PostprocessParams params = http::parse_postprocess_params(req, b);
      const PngBytes seg_raw = store_->get(rec.image_keys.at("seg_raw")).bytes;
      const PngBytes original = store_->get(rec.image_keys.at("original")).bytes;
      const PipelineResult result = processor_->adjust(seg_raw, original, rec.canonical_scale, params);

      store_->put(rec.image_keys.at("seg"), result.images.at("seg"), kPng);
      store_->put(rec.image_keys.at("overlay"), result.images.at("overlay"), kPng);
      rec.params = params;
      rec.scoring = result.scoring;
      store_->put_text(result_record_key(id), to_json(rec).dump(), kJson);
      const int t = options_.limits.thumbnail_max_dim;
      http::send_json(res, json{{"scoring", http::scoring_to_json(rec.scoring)},
                                {"params", http::params_to_json(params)},
                                {"thumbnails",
                                 {{"seg", thumbnail_b64(result.images.at("seg"), t)},
                                  {"overlay", thumbnail_b64(result.images.at("overlay"), t)}}}});
    });
  });

  server_.Post(R"(/feedback/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    if (!gate(req, res)) return;
    http::guarded(res, [&] {
      const std::string id = req.matches[1];
      load_result(*store_, id);  // 404 for unknown results
      std::string text;
      const auto body = http::json_body(req);
      if (auto f = http::field(req, "text", body ? &*body : nullptr)) {
        text = *f;
      } else if (req.get_header_value("Content-Type").starts_with("text/plain")) {
        text = req.body;
      }
      if (text.empty()) throw Error(ErrorCode::kInvalidParameter, "feedback text is empty");
      if (utf8_length(text) > kMaxFeedbackChars) {
        throw Error(ErrorCode::kInvalidParameter, "feedback is limited to 10000 characters");
      }
      const std::int64_t t = now();
      char stamp[24];
      std::snprintf(stamp, sizeof stamp, "%020lld", static_cast<long long>(t));
      const std::string key = "feedback/" + id + "/" + stamp + "-" + http::random_token() + ".json";
      store_->put_text(key, json{{"result_id", id}, {"text", text}, {"created_at", t}}.dump(), kJson);
      res.status = 204;
    });
  });
}

}  // namespace pq
