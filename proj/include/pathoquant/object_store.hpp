#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pq {

/// Slash-separated key whose segments match [A-Za-z0-9._-]+, none of which
/// is "." or "..", at most 1024 characters in total.
bool is_valid_object_key(std::string_view key) noexcept;

/// Throws KeyInvalid unless is_valid_object_key(key).
void require_valid_object_key(std::string_view key);

struct StoredObject {
  std::string key;
  std::vector<std::uint8_t> bytes;
  std::string content_type;
};

/// Flat key/value blob storage. All operations are safe under concurrent
/// use; a put is visible atomically (readers see the old or the new bytes,
/// never a mix).
class ObjectStore {
 public:
  static constexpr std::size_t kDefaultMaxObjectBytes = 256u << 20;

  virtual ~ObjectStore() = default;

  virtual void put(std::string_view key, std::span<const std::uint8_t> bytes,
                   std::string_view content_type) = 0;
  /// Throws NotFound when the key has never been written or was deleted.
  virtual StoredObject get(std::string_view key) const = 0;
  /// Succeeds when the key does not exist.
  virtual void remove(std::string_view key) = 0;
  /// Keys starting with `prefix`, sorted lexicographically by byte value.
  virtual std::vector<std::string> list(std::string_view prefix) const = 0;

  bool exists(std::string_view key) const;
  void put_text(std::string_view key, std::string_view text, std::string_view content_type);
  std::string get_text(std::string_view key) const;
};

/// Directory tree under `root`. Key "a/b" lives in root/objects/a/b~obj as
/// a content-type line followed by the raw bytes; the '~' suffix cannot
/// occur in a key, so "a" and "a/b" never collide. Writes go to a temporary
/// file in root/tmp and are renamed into place.
class LocalObjectStore final : public ObjectStore {
 public:
  explicit LocalObjectStore(std::filesystem::path root,
                            std::size_t max_object_bytes = kDefaultMaxObjectBytes);

  void put(std::string_view key, std::span<const std::uint8_t> bytes,
           std::string_view content_type) override;
  StoredObject get(std::string_view key) const override;
  void remove(std::string_view key) override;
  std::vector<std::string> list(std::string_view prefix) const override;

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path object_path(std::string_view key) const;

  std::filesystem::path root_;
  std::size_t max_object_bytes_;
};

struct S3Config {
  std::string endpoint;  // scheme://host[:port]
  std::string region = "us-east-1";
  std::string bucket;
  std::string access_key;
  std::string secret_key;
  std::string session_token;  // optional
  std::string prefix;         // optional key prefix inside the bucket
  int timeout_seconds = 30;
};

/// S3-compatible REST client (path-style addressing, SigV4, ListObjectsV2).
class S3ObjectStore final : public ObjectStore {
 public:
  explicit S3ObjectStore(S3Config config,
                         std::size_t max_object_bytes = kDefaultMaxObjectBytes);

  void put(std::string_view key, std::span<const std::uint8_t> bytes,
           std::string_view content_type) override;
  StoredObject get(std::string_view key) const override;
  void remove(std::string_view key) override;
  std::vector<std::string> list(std::string_view prefix) const override;

 private:
  S3Config config_;
  std::size_t max_object_bytes_;
};

// AWS Signature Version 4 primitives, exposed for testing.
namespace sigv4 {

std::string sha256_hex(std::string_view data);
std::string hmac_sha256(std::string_view key, std::string_view data);
std::string hex(std::string_view bytes);
/// RFC 3986 encoding; '/' is kept when encode_slash is false.
std::string uri_encode(std::string_view s, bool encode_slash);

struct Request {
  std::string method;
  std::string path;  // already URI-encoded
  std::vector<std::pair<std::string, std::string>> query;  // raw values
  std::vector<std::pair<std::string, std::string>> headers;
  std::string payload_hash;
};

struct Signature {
  std::string canonical_request;
  std::string string_to_sign;
  std::string signature;
  std::string signed_headers;
  std::string authorization;
};

/// `amz_date` is YYYYMMDD'T'HHMMSS'Z'. Headers must already include host
/// and any x-amz-* headers that should be signed.
Signature sign(const Request& request, std::string_view access_key, std::string_view secret_key,
               std::string_view region, std::string_view service, std::string_view amz_date);

}  // namespace sigv4

}  // namespace pq
