#pragma once

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "pathoquant/fixture.hpp"
#include "pathoquant/imaging.hpp"
#include "pathoquant/inference.hpp"
#include "pathoquant/service/api_service.hpp"
#include "pathoquant/service/job_pool.hpp"
#include "pathoquant/service/pipeline.hpp"

namespace pqtest {

namespace fs = std::filesystem;
using Bytes = std::vector<std::uint8_t>;

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

Bytes read_file(const fs::path& p);
void write_file(const fs::path& p, const Bytes& bytes);
void write_file(const fs::path& p, const std::string& text);
std::string as_string(const Bytes& b);
Bytes as_bytes(const std::string& s);
fs::path data_path(const std::string& name);

/// Baseline JPEG via libjpeg; optionally carries an EXIF APP1 segment and a
/// comment marker.
Bytes write_jpeg(const pq::RasterImage& img, int quality, bool with_metadata);
/// 24-bit (or 32-bit with alpha byte `alpha`) BI_RGB BMP.
Bytes write_bmp(const pq::RasterImage& img, bool top_down, int bits = 24, std::uint8_t alpha = 255);
/// Uncompressed chunky RGB TIFF, little or big endian, `rows_per_strip` rows per strip.
Bytes write_tiff(const pq::RasterImage& img, bool big_endian, int rows_per_strip);

/// Chunk type names of a PNG stream in order.
std::vector<std::string> png_chunks(const Bytes& png);

pq::RasterImage random_image(int width, int height, std::uint64_t seed);
pq::RasterImage solid_image(int width, int height, std::array<std::uint8_t, 3> rgb);

/// Independent ZIP reader: walks the central directory, inflates each
/// member and checks its CRC. Throws std::runtime_error on any mismatch.
struct ZipMember {
  std::string name;
  Bytes data;
  std::uint16_t method = 0;
  std::uint16_t dos_time = 0;
  std::uint16_t dos_date = 0;
};
std::vector<ZipMember> read_zip(const Bytes& archive);

/// Reference backend that holds every image until release() is called;
/// counts how many images have arrived.
class GatedBackend final : public pq::InferenceBackend {
 public:
  pq::BackendOutput run(const pq::RasterImage& img) const override;
  /// Blocks here, once per image, until release().
  std::unique_ptr<const pq::InferenceBackend> bind(const pq::RasterImage& whole) const override;
  void release();
  int started() const { return started_.load(); }

 private:
  pq::ReferenceBackend inner_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  bool open_ = false;
  mutable std::atomic<int> started_{0};
};

/// API service on an ephemeral loopback port.
struct ApiHarness {
  explicit ApiHarness(std::shared_ptr<const pq::InferenceBackend> backend = nullptr, int workers = 2,
                      int queue = 4, std::shared_ptr<const pq::ObjectStore> results = nullptr,
                      pq::PipelineConfig config = {});
  ~ApiHarness();
  httplib::Client client() const;
  std::string url() const;

  std::shared_ptr<pq::JobPool> pool;
  std::shared_ptr<const pq::Pipeline> pipeline;
  std::unique_ptr<pq::ApiService> service;
  int port = 0;
};

httplib::Result post_image(httplib::Client& cli, const std::string& path, const Bytes& image,
                           const std::string& field = "img", const std::string& filename = "img.png");

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};
/// Runs the pathoquant binary with `args` (already shell-quoted where needed).
CliResult run_cli(const std::string& args, const std::string& env = "");
std::string cli_path();

/// A loopback port that was free a moment ago.
int free_port();

/// `pathoquant serve` as a child process with output captured to files.
class ServeProcess {
 public:
  explicit ServeProcess(const std::vector<std::string>& args);
  ~ServeProcess();
  ServeProcess(const ServeProcess&) = delete;
  ServeProcess& operator=(const ServeProcess&) = delete;

  /// Polls GET url+"/api/health" (or "/" when `path` says so) until 200.
  bool wait_ready(int port, const std::string& path, std::chrono::milliseconds budget) const;
  void signal(int sig) const;
  /// Exit code, or -1 when it did not exit within `budget` (then killed).
  int wait_exit(std::chrono::milliseconds budget);
  std::string output() const;

 private:
  TempDir tmp_;
  int pid_ = -1;
  bool reaped_ = false;
  int status_ = 0;
};

/// Decoded scoring triple from an API JSON body.
pq::QuantResult scoring_of(const std::string& json_body);

}  // namespace pqtest
