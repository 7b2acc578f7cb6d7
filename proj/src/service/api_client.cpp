#include "pathoquant/service/api_client.hpp"

#include <httplib.h>

#include <json.hpp>

#include "pathoquant/error.hpp"
#include "pathoquant/service/base64.hpp"
#include "pathoquant/service/http_util.hpp"

namespace pq {

namespace {

using nlohmann::json;

std::string query_string(const std::vector<std::pair<std::string, std::string>>& q) {
  std::string out;
  for (const auto& [k, v] : q) {
    out += out.empty() ? '?' : '&';
    out += k + '=' + httplib::detail::encode_query_param(v);
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> params_query(const PostprocessParams& p) {
  auto num = [](double v) { return json(v).dump(); };
  std::vector<std::pair<std::string, std::string>> q = {
      {"seg_threshold", num(p.seg_threshold)},
      {"size_gate_min", num(p.size_gate_min)},
      {"marker_threshold", num(p.marker_threshold)}};
  if (p.size_gate_max) q.emplace_back("size_gate_max", num(*p.size_gate_max));
  return q;
}

PipelineResult parse_result(const httplib::Result& res, const std::string& what) {
  if (!res) {
    throw Error(ErrorCode::kInternal, what + ": " + httplib::to_string(res.error()));
  }
  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInternal,
                what + ": HTTP " + std::to_string(res->status) + " with a non-JSON body");
  }
  if (res->status != 200) {
    const std::string code = body.value("error", std::string("internal"));
    const std::string message = body.value("message", std::string("request failed"));
    throw Error(http::error_code_from_wire(code),
                what + ": HTTP " + std::to_string(res->status) + " " + code + ": " + message);
  }
  PipelineResult out;
  try {
    for (const auto& [name, b64] : body.at("images").items()) {
      out.images[name] = base64_decode(b64.get<std::string>());
    }
    out.scoring = http::scoring_from_json(body.at("scoring"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInternal, what + ": unexpected response shape: " + e.what());
  }
  return out;
}

httplib::Client make_client(const std::string& url, int timeout) {
  httplib::Client cli(url);
  cli.set_connection_timeout(10);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  return cli;
}

std::string as_string(std::span<const std::uint8_t> bytes) {
  return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

}  // namespace

ApiClient::ApiClient(std::string base_url, int timeout_seconds)
    : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  if (base_url_.find("://") == std::string::npos) base_url_ = "http://" + base_url_;
}

PipelineResult ApiClient::infer(std::span<const std::uint8_t> image, const std::string& filename,
                                const std::string& resolution, const PostprocessParams& params,
                                bool slim, bool pil) const {
  auto q = params_query(params);
  q.insert(q.begin(), {"resolution", resolution});
  if (slim) q.emplace_back("slim", "true");
  if (pil) q.emplace_back("pil", "true");
  httplib::MultipartFormDataItems items = {
      {"img", as_string(image), filename, "application/octet-stream"}};
  auto cli = make_client(base_url_, timeout_seconds_);
  auto res = cli.Post("/api/infer" + query_string(q), items);
  PipelineResult out = parse_result(res, "POST /api/infer");
  if (const auto r = parse_resolution(resolution)) out.canonical_scale = canonical_scale(*r);
  return out;
}

PipelineResult ApiClient::adjust(std::span<const std::uint8_t> seg_raw_png,
                                 const std::vector<std::uint8_t>* original_png,
                                 const PostprocessParams& params) const {
  httplib::MultipartFormDataItems items = {
      {"seg_raw", as_string(seg_raw_png), "seg_raw.png", "image/png"}};
  if (original_png != nullptr) {
    items.push_back({"img", as_string(*original_png), "original.png", "image/png"});
  }
  auto cli = make_client(base_url_, timeout_seconds_);
  auto res = cli.Post("/api/adjust" + query_string(params_query(params)), items);
  return parse_result(res, "POST /api/adjust");
}

bool ApiClient::healthy() const {
  auto cli = make_client(base_url_, 5);
  auto res = cli.Get("/api/health");
  return res && res->status == 200;
}

}  // namespace pq
