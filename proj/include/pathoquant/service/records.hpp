#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include <json.hpp>

#include "pathoquant/inference.hpp"
#include "pathoquant/object_store.hpp"
#include "pathoquant/postprocess.hpp"

namespace pq {

// Object layout shared by the website and the API's result_id lookups:
//   uploads/<id>/original.png, uploads/<id>/record.json
//   results/<id>/<image>.png (original plus the seven result images),
//   results/<id>/record.json
//   feedback/<result id>/<time>-<token>.json

std::string upload_prefix(std::string_view upload_id);
std::string upload_image_key(std::string_view upload_id);
std::string upload_record_key(std::string_view upload_id);
std::string result_prefix(std::string_view result_id);
std::string result_image_key(std::string_view result_id, std::string_view image);
std::string result_record_key(std::string_view result_id);

/// True when `id` can be embedded in an object key as a single segment.
bool is_valid_record_id(std::string_view id) noexcept;

struct UploadRecord {
  std::string upload_id;
  std::string object_key;
  int width = 0;
  int height = 0;
  std::int64_t created_at = 0;  // unix seconds
};

struct ResultRecord {
  std::string result_id;
  std::string upload_id;
  Resolution resolution = Resolution::k20x;
  double canonical_scale = 1.0;
  int width = 0;
  int height = 0;
  PostprocessParams params;
  std::map<std::string, std::string> image_keys;
  QuantResult scoring;
  std::int64_t created_at = 0;
};

nlohmann::json to_json(const UploadRecord& r);
UploadRecord upload_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ResultRecord& r);
ResultRecord result_from_json(const nlohmann::json& j);

/// Throws NotFound for an unknown or malformed id.
UploadRecord load_upload(const ObjectStore& store, std::string_view upload_id);
ResultRecord load_result(const ObjectStore& store, std::string_view result_id);

}  // namespace pq
