#include <httplib.h>

#include <chrono>
#include <ctime>

#include "pathoquant/error.hpp"
#include "pathoquant/object_store.hpp"

namespace pq {

namespace {

std::string amz_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[17];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::string host_of(const std::string& endpoint) {
  auto start = endpoint.find("://");
  start = start == std::string::npos ? 0 : start + 3;
  auto end = endpoint.find('/', start);
  return endpoint.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

std::string xml_unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos) {
      out.push_back('&');
      continue;
    }
    const std::string_view ent = s.substr(i + 1, semi - i - 1);
    if (ent == "amp") out.push_back('&');
    else if (ent == "lt") out.push_back('<');
    else if (ent == "gt") out.push_back('>');
    else if (ent == "quot") out.push_back('"');
    else if (ent == "apos") out.push_back('\'');
    else {
      out.append(s.substr(i, semi - i + 1));
    }
    i = semi;
  }
  return out;
}

std::vector<std::string> xml_values(std::string_view xml, std::string_view tag) {
  std::vector<std::string> out;
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  std::size_t pos = 0;
  while ((pos = xml.find(open, pos)) != std::string_view::npos) {
    const auto start = pos + open.size();
    const auto end = xml.find(close, start);
    if (end == std::string_view::npos) break;
    out.push_back(xml_unescape(xml.substr(start, end - start)));
    pos = end + close.size();
  }
  return out;
}

struct SignedCall {
  std::string path;  // encoded path plus query string
  httplib::Headers headers;
};

SignedCall prepare(const S3Config& cfg, const std::string& method, const std::string& key,
                   const std::vector<std::pair<std::string, std::string>>& query,
                   const std::string& payload_hash, std::string_view content_type) {
  sigv4::Request req;
  req.method = method;
  req.path = "/" + sigv4::uri_encode(cfg.bucket, true);
  if (!key.empty()) req.path += "/" + sigv4::uri_encode(key, false);
  req.query = query;
  req.payload_hash = payload_hash;
  const std::string date = amz_now();
  req.headers = {{"host", host_of(cfg.endpoint)},
                 {"x-amz-content-sha256", payload_hash},
                 {"x-amz-date", date}};
  if (!cfg.session_token.empty()) req.headers.emplace_back("x-amz-security-token", cfg.session_token);
  if (!content_type.empty()) req.headers.emplace_back("content-type", std::string(content_type));
  const auto sig = sigv4::sign(req, cfg.access_key, cfg.secret_key, cfg.region, "s3", date);

  SignedCall call;
  call.path = req.path;
  char sep = '?';
  for (const auto& [k, v] : query) {
    call.path += sep + sigv4::uri_encode(k, true) + '=' + sigv4::uri_encode(v, true);
    sep = '&';
  }
  for (const auto& [k, v] : req.headers) {
    if (k == "content-type") continue;  // passed separately to httplib
    call.headers.emplace(k == "host" ? "Host" : k, v);
  }
  call.headers.emplace("Authorization", sig.authorization);
  return call;
}

httplib::Client make_client(const S3Config& cfg) {
  httplib::Client cli(cfg.endpoint);
  cli.set_url_encode(false);
  cli.set_connection_timeout(cfg.timeout_seconds);
  cli.set_read_timeout(cfg.timeout_seconds);
  cli.set_write_timeout(cfg.timeout_seconds);
  return cli;
}

[[noreturn]] void fail(const std::string& op, const httplib::Result& res) {
  if (!res) {
    throw Error(ErrorCode::kStorageUnavailable,
                op + ": " + httplib::to_string(res.error()));
  }
  throw Error(ErrorCode::kStorageUnavailable, op + ": HTTP " + std::to_string(res->status));
}

}  // namespace

S3ObjectStore::S3ObjectStore(S3Config config, std::size_t max_object_bytes)
    : config_(std::move(config)), max_object_bytes_(max_object_bytes) {
  if (config_.endpoint.empty() || config_.bucket.empty()) {
    throw Error(ErrorCode::kInvalidParameter, "S3 store needs an endpoint and a bucket");
  }
  if (!config_.prefix.empty() && config_.prefix.back() != '/') config_.prefix += '/';
}

void S3ObjectStore::put(std::string_view key, std::span<const std::uint8_t> bytes,
                        std::string_view content_type) {
  require_valid_object_key(key);
  if (bytes.size() > max_object_bytes_) {
    throw Error(ErrorCode::kInvalidParameter, "object exceeds the per-object size cap");
  }
  const std::string body(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const std::string type = content_type.empty() ? "application/octet-stream" : std::string(content_type);
  auto call = prepare(config_, "PUT", config_.prefix + std::string(key), {},
                      sigv4::sha256_hex(body), type);
  auto cli = make_client(config_);
  auto res = cli.Put(call.path, call.headers, body, type);
  if (!res || res->status / 100 != 2) fail("PUT " + std::string(key), res);
}

StoredObject S3ObjectStore::get(std::string_view key) const {
  require_valid_object_key(key);
  auto call = prepare(config_, "GET", config_.prefix + std::string(key), {},
                      sigv4::sha256_hex(""), "");
  auto cli = make_client(config_);
  auto res = cli.Get(call.path, call.headers);
  if (res && res->status == 404) {
    throw Error(ErrorCode::kNotFound, "no object '" + std::string(key) + "'");
  }
  if (!res || res->status / 100 != 2) fail("GET " + std::string(key), res);
  StoredObject obj;
  obj.key = std::string(key);
  obj.bytes.assign(res->body.begin(), res->body.end());
  obj.content_type = res->get_header_value("Content-Type");
  return obj;
}

void S3ObjectStore::remove(std::string_view key) {
  require_valid_object_key(key);
  auto call = prepare(config_, "DELETE", config_.prefix + std::string(key), {},
                      sigv4::sha256_hex(""), "");
  auto cli = make_client(config_);
  auto res = cli.Delete(call.path, call.headers);
  if (res && (res->status / 100 == 2 || res->status == 404)) return;
  fail("DELETE " + std::string(key), res);
}

std::vector<std::string> S3ObjectStore::list(std::string_view prefix) const {
  std::vector<std::string> keys;
  std::string token;
  auto cli = make_client(config_);
  while (true) {
    std::vector<std::pair<std::string, std::string>> query = {
        {"list-type", "2"}, {"prefix", config_.prefix + std::string(prefix)}};
    if (!token.empty()) query.emplace_back("continuation-token", token);
    auto call = prepare(config_, "GET", "", query, sigv4::sha256_hex(""), "");
    auto res = cli.Get(call.path, call.headers);
    if (!res || res->status / 100 != 2) fail("LIST " + std::string(prefix), res);
    for (std::string& k : xml_values(res->body, "Key")) {
      if (k.starts_with(config_.prefix)) keys.push_back(k.substr(config_.prefix.size()));
    }
    const auto truncated = xml_values(res->body, "IsTruncated");
    const auto next = xml_values(res->body, "NextContinuationToken");
    if (truncated.empty() || truncated.front() != "true" || next.empty()) break;
    token = next.front();
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace pq
