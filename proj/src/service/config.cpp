#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "pathoquant/error.hpp"
#include "pathoquant/service/config.hpp"

#ifndef PQ_DEFAULT_WEB_ROOT
#define PQ_DEFAULT_WEB_ROOT "web"
#endif
#ifndef PQ_DEFAULT_SAMPLE_DIR
#define PQ_DEFAULT_SAMPLE_DIR "samples"
#endif

namespace pq {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::kInvalidParameter, msg); }

int parse_int(const std::string& name, const std::string& text) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size() || v < INT32_MIN || v > INT32_MAX) throw std::out_of_range(name);
    return static_cast<int>(v);
  } catch (const std::logic_error&) {
    bad(name + " must be an integer, got '" + text + "'");
  }
}

std::int64_t parse_int64(const std::string& name, const std::string& text) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(name);
    return v;
  } catch (const std::logic_error&) {
    bad(name + " must be an integer, got '" + text + "'");
  }
}

Vec3 parse_vec3(const std::string& name, const std::string& text) {
  Vec3 v{};
  std::istringstream in(text);
  std::string part;
  int i = 0;
  while (std::getline(in, part, ',')) {
    if (i >= 3) bad(name + " needs exactly three components");
    try {
      std::size_t used = 0;
      v[i++] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(name);
    } catch (const std::logic_error&) {
      bad(name + " has a non-numeric component '" + part + "'");
    }
  }
  if (i != 3) bad(name + " needs exactly three components");
  return v;
}

PipelineMode parse_mode(const std::string& s) {
  if (s == "in_process") return PipelineMode::kInProcess;
  if (s == "http") return PipelineMode::kHttp;
  bad("pipeline_mode must be in_process or http, got '" + s + "'");
}

StorageConfig::Kind parse_kind(const std::string& s) {
  if (s == "local") return StorageConfig::Kind::kLocal;
  if (s == "s3") return StorageConfig::Kind::kS3;
  bad("storage kind must be local or s3, got '" + s + "'");
}

}  // namespace

int ServiceConfig::effective_pool_size() const noexcept {
  if (pool_size > 0) return pool_size;
  return std::max(1u, std::thread::hardware_concurrency());
}

int ServiceConfig::effective_queue_capacity() const noexcept {
  return queue_capacity >= 0 ? queue_capacity : 2 * effective_pool_size();
}

StainMatrix ServiceConfig::stains() const { return StainMatrix(hema_vector, dab_vector); }

void ServiceConfig::validate() const {
  auto port_ok = [](int p) { return p >= 0 && p <= 65535; };
  if (!port_ok(api_port) || !port_ok(web_port)) bad("ports must be in [0, 65535]");
  if (pool_size < 0) bad("pool_size must be >= 0");
  if (queue_capacity < -1) bad("queue_capacity must be >= 0");
  if (ttl_seconds <= 0) bad("ttl_seconds must be positive");
  limits.validate();
  try {
    stains();
  } catch (const Error& e) {
    bad(std::string("stain vectors: ") + e.what());
  }
  plan_tiles(1, 1, infer.tile_size, infer.overlap);
  if (infer.parallelism < 1) bad("tile parallelism must be >= 1");
  if (storage.kind == StorageConfig::Kind::kS3 &&
      (storage.s3.endpoint.empty() || storage.s3.bucket.empty())) {
    bad("s3 storage needs an endpoint and a bucket");
  }
}

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

ServiceConfig config_from_json(std::string_view json_text, ServiceConfig c) {
  try {
    const json j = json::parse(json_text);
    c.host = j.value("host", c.host);
    c.api_port = j.value("api_port", c.api_port);
    c.web_port = j.value("web_port", c.web_port);
    c.pool_size = j.value("pool_size", c.pool_size);
    c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
    c.limits.max_dim = j.value("max_dim", c.limits.max_dim);
    c.limits.thumbnail_max_dim = j.value("thumbnail_max_dim", c.limits.thumbnail_max_dim);
    if (j.contains("stains")) {
      const json& s = j.at("stains");
      if (s.contains("hema")) c.hema_vector = s.at("hema").get<Vec3>();
      if (s.contains("dab")) c.dab_vector = s.at("dab").get<Vec3>();
    }
    c.infer.tile_size = j.value("tile_size", c.infer.tile_size);
    c.infer.overlap = j.value("tile_overlap", c.infer.overlap);
    c.infer.parallelism = j.value("tile_parallelism", c.infer.parallelism);
    c.ttl_seconds = j.value("ttl_seconds", c.ttl_seconds);
    if (j.contains("sample_dir")) c.sample_dir = j.at("sample_dir").get<std::string>();
    if (j.contains("web_root")) c.web_root = j.at("web_root").get<std::string>();
    if (j.contains("pipeline_mode")) c.pipeline_mode = parse_mode(j.at("pipeline_mode"));
    c.api_url = j.value("api_url", c.api_url);
    if (j.contains("storage")) {
      const json& s = j.at("storage");
      if (s.contains("kind")) c.storage.kind = parse_kind(s.at("kind"));
      if (s.contains("root")) c.storage.root = s.at("root").get<std::string>();
      c.storage.max_object_bytes = s.value("max_object_bytes", c.storage.max_object_bytes);
      c.storage.s3.endpoint = s.value("endpoint", c.storage.s3.endpoint);
      c.storage.s3.region = s.value("region", c.storage.s3.region);
      c.storage.s3.bucket = s.value("bucket", c.storage.s3.bucket);
      c.storage.s3.prefix = s.value("prefix", c.storage.s3.prefix);
      c.storage.s3.access_key = s.value("access_key", c.storage.s3.access_key);
      c.storage.s3.secret_key = s.value("secret_key", c.storage.s3.secret_key);
    }
  } catch (const json::exception& e) {
    bad(std::string("invalid configuration: ") + e.what());
  }
  return c;
}

ServiceConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
  ServiceConfig c;
  c.web_root = PQ_DEFAULT_WEB_ROOT;
  c.sample_dir = PQ_DEFAULT_SAMPLE_DIR;
  if (file) {
    std::ifstream in(*file);
    if (!in) bad("cannot read configuration file " + file->string());
    std::ostringstream ss;
    ss << in.rdbuf();
    c = config_from_json(ss.str(), c);
  }
  auto str = [&](const char* name, std::string& field) {
    if (auto v = env(name)) field = *v;
  };
  auto num = [&](const char* name, int& field) {
    if (auto v = env(name)) field = parse_int(name, *v);
  };
  str("PQ_HOST", c.host);
  num("PQ_API_PORT", c.api_port);
  num("PQ_WEB_PORT", c.web_port);
  num("PQ_POOL_SIZE", c.pool_size);
  num("PQ_QUEUE_CAPACITY", c.queue_capacity);
  num("PQ_MAX_DIM", c.limits.max_dim);
  num("PQ_TILE_SIZE", c.infer.tile_size);
  num("PQ_TILE_OVERLAP", c.infer.overlap);
  if (auto v = env("PQ_STAIN_HEMA")) c.hema_vector = parse_vec3("PQ_STAIN_HEMA", *v);
  if (auto v = env("PQ_STAIN_DAB")) c.dab_vector = parse_vec3("PQ_STAIN_DAB", *v);
  if (auto v = env("PQ_TTL_SECONDS")) c.ttl_seconds = parse_int64("PQ_TTL_SECONDS", *v);
  if (auto v = env("PQ_SAMPLE_DIR")) c.sample_dir = *v;
  if (auto v = env("PQ_WEB_ROOT")) c.web_root = *v;
  if (auto v = env("PQ_PIPELINE_MODE")) c.pipeline_mode = parse_mode(*v);
  str("PQ_API_URL", c.api_url);
  if (auto v = env("PQ_STORAGE")) c.storage.kind = parse_kind(*v);
  if (auto v = env("PQ_STORAGE_ROOT")) c.storage.root = *v;
  str("PQ_S3_ENDPOINT", c.storage.s3.endpoint);
  str("PQ_S3_REGION", c.storage.s3.region);
  str("PQ_S3_BUCKET", c.storage.s3.bucket);
  str("PQ_S3_PREFIX", c.storage.s3.prefix);
  str("AWS_ACCESS_KEY_ID", c.storage.s3.access_key);
  str("AWS_SECRET_ACCESS_KEY", c.storage.s3.secret_key);
  str("AWS_SESSION_TOKEN", c.storage.s3.session_token);
  c.validate();
  return c;
}

std::unique_ptr<ObjectStore> open_store(const StorageConfig& storage) {
  if (storage.kind == StorageConfig::Kind::kS3) {
    return std::make_unique<S3ObjectStore>(storage.s3, storage.max_object_bytes);
  }
  return std::make_unique<LocalObjectStore>(storage.root, storage.max_object_bytes);
}

}  // namespace pq
