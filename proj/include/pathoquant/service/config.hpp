#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "pathoquant/imaging.hpp"
#include "pathoquant/inference.hpp"
#include "pathoquant/object_store.hpp"

namespace pq {

enum class PipelineMode { kInProcess, kHttp };

struct StorageConfig {
  enum class Kind { kLocal, kS3 } kind = Kind::kLocal;
  std::filesystem::path root = "pathoquant-data";
  S3Config s3;
  std::size_t max_object_bytes = ObjectStore::kDefaultMaxObjectBytes;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int api_port = 8000;
  int web_port = 8001;
  int pool_size = 0;       // 0: number of processor cores
  int queue_capacity = -1;  // -1: twice the pool size
  ImageLimits limits;
  Vec3 hema_vector = StainMatrix::standard_hdab().hema();
  Vec3 dab_vector = StainMatrix::standard_hdab().dab();
  InferOptions infer;
  StorageConfig storage;
  std::int64_t ttl_seconds = 7 * 24 * 3600;
  std::filesystem::path sample_dir;
  std::filesystem::path web_root;
  PipelineMode pipeline_mode = PipelineMode::kInProcess;
  std::string api_url;  // used when pipeline_mode is kHttp; defaults to the local API

  int effective_pool_size() const noexcept;
  int effective_queue_capacity() const noexcept;
  StainMatrix stains() const;
  /// Throws InvalidParameter on inconsistent settings.
  void validate() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Process environment.
std::optional<std::string> process_env(const std::string& name);

/// Defaults, then the JSON file (if given), then PQ_* environment
/// overrides (and AWS_* credentials for S3). Throws InvalidParameter.
ServiceConfig load_config(const std::optional<std::filesystem::path>& file,
                          const EnvLookup& env = process_env);

ServiceConfig config_from_json(std::string_view json_text, ServiceConfig base = {});

std::unique_ptr<ObjectStore> open_store(const StorageConfig& storage);

}  // namespace pq
