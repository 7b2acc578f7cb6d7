#include "pathoquant/service/http_util.hpp"

#include <openssl/rand.h>

#include <cmath>

#include "pathoquant/service/base64.hpp"

namespace pq::http {

using nlohmann::json;

ErrorMapping map_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnsupportedFormat: return {400, "unsupported_format"};
    case ErrorCode::kCorruptImage: return {400, "corrupt_image"};
    case ErrorCode::kImageTooLarge: return {413, "image_too_large"};
    case ErrorCode::kInvalidScale:
    case ErrorCode::kInvalidGate:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kInvalidWindow:
    case ErrorCode::kInvalidParameter:
    case ErrorCode::kInvalidTileGeometry:
    case ErrorCode::kKeyInvalid: return {400, "bad_parameter"};
    case ErrorCode::kNotFound: return {404, "not_found"};
    case ErrorCode::kOverloaded: return {503, "overloaded"};
    case ErrorCode::kDegenerateStains:
    case ErrorCode::kBackendFailure:
    case ErrorCode::kStorageUnavailable:
    case ErrorCode::kInternal: return {500, "internal"};
  }
  return {500, "internal"};
}

ErrorCode error_code_from_wire(std::string_view code) {
  if (code == "unsupported_format") return ErrorCode::kUnsupportedFormat;
  if (code == "corrupt_image") return ErrorCode::kCorruptImage;
  if (code == "image_too_large") return ErrorCode::kImageTooLarge;
  if (code == "bad_parameter") return ErrorCode::kInvalidParameter;
  if (code == "not_found") return ErrorCode::kNotFound;
  if (code == "overloaded") return ErrorCode::kOverloaded;
  return ErrorCode::kInternal;
}

void send_json(httplib::Response& res, const json& body, int status) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code,
                std::string_view message) {
  send_json(res, json{{"error", code}, {"message", message}}, status);
}

void send_error(httplib::Response& res, const Error& e) {
  const auto m = map_error(e.code());
  send_error(res, m.status, m.code, e.what());
}

void guarded(httplib::Response& res, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e);
  } catch (const std::bad_alloc&) {
    send_error(res, 500, "internal", "out of memory");
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

std::optional<std::string> field(const httplib::Request& req, const std::string& name,
                                 const json* body) {
  if (req.has_param(name)) return req.get_param_value(name);
  if (req.has_file(name)) {
    const auto f = req.get_file_value(name);
    if (f.filename.empty()) return f.content;
  }
  if (body != nullptr && body->is_object() && body->contains(name)) {
    const json& v = body->at(name);
    if (v.is_null()) return std::nullopt;
    return v.is_string() ? v.get<std::string>() : v.dump();
  }
  return std::nullopt;
}

bool parse_bool(const std::string& name, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "True") return true;
  if (text == "false" || text == "0" || text == "no" || text == "False") return false;
  throw Error(ErrorCode::kInvalidParameter, name + " must be true or false, got '" + text + "'");
}

double parse_double(const std::string& name, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size() && std::isfinite(v)) return v;
  } catch (const std::logic_error&) {
  }
  throw Error(ErrorCode::kInvalidParameter, name + " must be a finite number, got '" + text + "'");
}

PostprocessParams parse_postprocess_params(const httplib::Request& req, const json* body,
                                           PostprocessParams p) {
  if (auto v = field(req, "seg_threshold", body)) p.seg_threshold = parse_double("seg_threshold", *v);
  if (auto v = field(req, "size_gate_min", body)) p.size_gate_min = parse_double("size_gate_min", *v);
  if (auto v = field(req, "size_gate_max", body)) {
    if (v->empty() || *v == "none" || *v == "null") {
      p.size_gate_max.reset();
    } else {
      p.size_gate_max = parse_double("size_gate_max", *v);
    }
  }
  if (auto v = field(req, "marker_threshold", body)) {
    p.marker_threshold = parse_double("marker_threshold", *v);
  }
  p.validate();
  return p;
}

json params_to_json(const PostprocessParams& p) {
  json j{{"seg_threshold", p.seg_threshold},
         {"size_gate_min", p.size_gate_min},
         {"size_gate_max", nullptr},
         {"marker_threshold", p.marker_threshold}};
  if (p.size_gate_max) j["size_gate_max"] = *p.size_gate_max;
  return j;
}

PostprocessParams params_from_json(const json& j) {
  PostprocessParams p;
  p.seg_threshold = j.at("seg_threshold").get<double>();
  p.size_gate_min = j.at("size_gate_min").get<double>();
  if (j.contains("size_gate_max") && !j.at("size_gate_max").is_null()) {
    p.size_gate_max = j.at("size_gate_max").get<double>();
  }
  p.marker_threshold = j.at("marker_threshold").get<double>();
  return p;
}

json scoring_to_json(const QuantResult& q) {
  return json{{"num_total", q.num_total}, {"num_pos", q.num_pos}, {"percent_pos", q.percent_pos}};
}

QuantResult scoring_from_json(const json& j) {
  QuantResult q;
  q.num_total = j.at("num_total").get<std::int64_t>();
  q.num_pos = j.at("num_pos").get<std::int64_t>();
  q.percent_pos = j.at("percent_pos").get<double>();
  return q;
}

std::string random_token() {
  std::uint8_t raw[16];
  if (RAND_bytes(raw, sizeof raw) != 1) throw Error(ErrorCode::kInternal, "RAND_bytes failed");
  std::string t = base64_encode(raw);
  for (char& c : t) {
    if (c == '+') c = '-';
    if (c == '/') c = '_';
  }
  while (!t.empty() && t.back() == '=') t.pop_back();
  return t;
}

std::optional<json> json_body(const httplib::Request& req) {
  const std::string type = req.get_header_value("Content-Type");
  if (type.find("application/json") == std::string::npos) return std::nullopt;
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::kInvalidParameter, "JSON body must be an object");
    return j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidParameter, std::string("malformed JSON body: ") + e.what());
  }
}

}  // namespace pq::http
