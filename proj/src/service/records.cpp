#include "pathoquant/service/records.hpp"

#include "pathoquant/error.hpp"
#include "pathoquant/service/http_util.hpp"

namespace pq {

using nlohmann::json;

std::string upload_prefix(std::string_view id) { return "uploads/" + std::string(id) + "/"; }
std::string upload_image_key(std::string_view id) { return upload_prefix(id) + "original.png"; }
std::string upload_record_key(std::string_view id) { return upload_prefix(id) + "record.json"; }
std::string result_prefix(std::string_view id) { return "results/" + std::string(id) + "/"; }
std::string result_image_key(std::string_view id, std::string_view image) {
  return result_prefix(id) + std::string(image) + ".png";
}
std::string result_record_key(std::string_view id) { return result_prefix(id) + "record.json"; }

bool is_valid_record_id(std::string_view id) noexcept {
  return !id.empty() && id.size() <= 64 && id.find('/') == std::string_view::npos &&
         is_valid_object_key(id);
}

json to_json(const UploadRecord& r) {
  return json{{"upload_id", r.upload_id},
              {"object_key", r.object_key},
              {"width", r.width},
              {"height", r.height},
              {"created_at", r.created_at}};
}

UploadRecord upload_from_json(const json& j) {
  UploadRecord r;
  r.upload_id = j.at("upload_id").get<std::string>();
  r.object_key = j.at("object_key").get<std::string>();
  r.width = j.at("width").get<int>();
  r.height = j.at("height").get<int>();
  r.created_at = j.at("created_at").get<std::int64_t>();
  return r;
}

json to_json(const ResultRecord& r) {
  return json{{"result_id", r.result_id},
              {"upload_id", r.upload_id},
              {"resolution", to_string(r.resolution)},
              {"canonical_scale", r.canonical_scale},
              {"width", r.width},
              {"height", r.height},
              {"params", http::params_to_json(r.params)},
              {"image_keys", r.image_keys},
              {"scoring", http::scoring_to_json(r.scoring)},
              {"created_at", r.created_at}};
}

ResultRecord result_from_json(const json& j) {
  ResultRecord r;
  r.result_id = j.at("result_id").get<std::string>();
  r.upload_id = j.at("upload_id").get<std::string>();
  const auto res = parse_resolution(j.at("resolution").get<std::string>());
  if (!res) throw Error(ErrorCode::kInternal, "stored record has an invalid resolution");
  r.resolution = *res;
  r.canonical_scale = j.at("canonical_scale").get<double>();
  r.width = j.at("width").get<int>();
  r.height = j.at("height").get<int>();
  r.params = http::params_from_json(j.at("params"));
  r.image_keys = j.at("image_keys").get<std::map<std::string, std::string>>();
  r.scoring = http::scoring_from_json(j.at("scoring"));
  r.created_at = j.at("created_at").get<std::int64_t>();
  return r;
}

namespace {

json load_record(const ObjectStore& store, const std::string& key) {
  try {
    return json::parse(store.get_text(key));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInternal, "corrupt record " + key + ": " + e.what());
  }
}

}  // namespace

UploadRecord load_upload(const ObjectStore& store, std::string_view id) {
  if (!is_valid_record_id(id)) throw Error(ErrorCode::kNotFound, "unknown upload id");
  try {
    return upload_from_json(load_record(store, upload_record_key(id)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInternal, std::string("corrupt upload record: ") + e.what());
  }
}

ResultRecord load_result(const ObjectStore& store, std::string_view id) {
  if (!is_valid_record_id(id)) throw Error(ErrorCode::kNotFound, "unknown result id");
  try {
    return result_from_json(load_record(store, result_record_key(id)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInternal, std::string("corrupt result record: ") + e.what());
  }
}

}  // namespace pq
