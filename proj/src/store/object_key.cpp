#include "pathoquant/error.hpp"
#include "pathoquant/object_store.hpp"

namespace pq {

namespace {

bool segment_char(char c) noexcept {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
         c == '.' || c == '_' || c == '-';
}

}  // namespace

bool is_valid_object_key(std::string_view key) noexcept {
  if (key.empty() || key.size() > 1024) return false;
  std::size_t start = 0;
  while (true) {
    const std::size_t slash = key.find('/', start);
    const std::string_view seg =
        key.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start);
    if (seg.empty() || seg == "." || seg == "..") return false;
    for (char c : seg) {
      if (!segment_char(c)) return false;
    }
    if (slash == std::string_view::npos) return true;
    start = slash + 1;
  }
}

void require_valid_object_key(std::string_view key) {
  if (!is_valid_object_key(key)) {
    throw Error(ErrorCode::kKeyInvalid, "invalid object key '" + std::string(key.substr(0, 80)) + "'");
  }
}

bool ObjectStore::exists(std::string_view key) const {
  try {
    get(key);
    return true;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNotFound) return false;
    throw;
  }
}

void ObjectStore::put_text(std::string_view key, std::string_view text,
                           std::string_view content_type) {
  put(key,
      std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()),
      content_type);
}

std::string ObjectStore::get_text(std::string_view key) const {
  const StoredObject obj = get(key);
  return std::string(obj.bytes.begin(), obj.bytes.end());
}

}  // namespace pq
