#pragma once

#include <httplib.h>

#include <json.hpp>
#include <optional>
#include <string>

#include "pathoquant/error.hpp"
#include "pathoquant/postprocess.hpp"

namespace pq::http {

struct ErrorMapping {
  int status;
  std::string code;
};

/// HTTP status and wire error code for a library error.
ErrorMapping map_error(ErrorCode code);

/// Inverse of the wire code, for clients reading an error body.
ErrorCode error_code_from_wire(std::string_view code);

void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200);
void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message);
void send_error(httplib::Response& res, const Error& e);

/// Runs `fn`, turning exceptions into JSON error responses.
void guarded(httplib::Response& res, const std::function<void()>& fn);

/// Looks a named value up in the query string, urlencoded form, multipart
/// text fields, and (when given) a JSON object body, in that order.
std::optional<std::string> field(const httplib::Request& req, const std::string& name,
                                 const nlohmann::json* body = nullptr);

/// Throws InvalidParameter for anything but true/false/1/0/yes/no.
bool parse_bool(const std::string& name, const std::string& text);
double parse_double(const std::string& name, const std::string& text);

/// Defaults overridden by seg_threshold, size_gate_min, size_gate_max and
/// marker_threshold; validated.
PostprocessParams parse_postprocess_params(const httplib::Request& req,
                                           const nlohmann::json* body = nullptr,
                                           PostprocessParams base = {});

nlohmann::json params_to_json(const PostprocessParams& p);
PostprocessParams params_from_json(const nlohmann::json& j);
nlohmann::json scoring_to_json(const QuantResult& q);
QuantResult scoring_from_json(const nlohmann::json& j);

/// 128 random bits, URL-safe base64 without padding (22 characters).
std::string random_token();

/// Parsed JSON object body, or nullopt when the request is not JSON.
/// Throws InvalidParameter for malformed JSON.
std::optional<nlohmann::json> json_body(const httplib::Request& req);

}  // namespace pq::http
