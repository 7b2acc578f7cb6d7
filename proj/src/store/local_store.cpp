#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <random>
#include <sstream>

#include "pathoquant/error.hpp"
#include "pathoquant/object_store.hpp"

namespace fs = std::filesystem;

namespace pq {

namespace {

constexpr std::string_view kSuffix = "~obj";

[[noreturn]] void unavailable(const std::string& what, const std::error_code& ec) {
  throw Error(ErrorCode::kStorageUnavailable, what + ": " + ec.message());
}

std::string temp_name() {
  static std::atomic<std::uint64_t> counter{0};
  static const std::uint64_t salt = std::random_device{}();
  std::ostringstream os;
  os << ::getpid() << '-' << std::hex << salt << '-' << counter.fetch_add(1) << ".tmp";
  return os.str();
}

bool within(const fs::path& root, const fs::path& p) {
  const auto r = root.lexically_normal();
  const auto n = p.lexically_normal();
  auto [ri, ni] = std::mismatch(r.begin(), r.end(), n.begin(), n.end());
  return ri == r.end() || (ri->empty() && std::next(ri) == r.end());
}

}  // namespace

LocalObjectStore::LocalObjectStore(fs::path root, std::size_t max_object_bytes)
    : max_object_bytes_(max_object_bytes) {
  std::error_code ec;
  fs::create_directories(root / "objects", ec);
  if (ec) unavailable("cannot create storage root " + root.string(), ec);
  fs::create_directories(root / "tmp", ec);
  if (ec) unavailable("cannot create storage root " + root.string(), ec);
  root_ = fs::canonical(root, ec);
  if (ec) unavailable("cannot resolve storage root " + root.string(), ec);
}

fs::path LocalObjectStore::object_path(std::string_view key) const {
  require_valid_object_key(key);
  fs::path p = root_ / "objects";
  p /= std::string(key) + std::string(kSuffix);
  if (!within(root_ / "objects", p)) {
    throw Error(ErrorCode::kKeyInvalid, "object key escapes the storage root");
  }
  return p;
}

void LocalObjectStore::put(std::string_view key, std::span<const std::uint8_t> bytes,
                           std::string_view content_type) {
  const fs::path target = object_path(key);
  if (bytes.size() > max_object_bytes_) {
    throw Error(ErrorCode::kInvalidParameter, "object exceeds the per-object size cap");
  }
  if (content_type.find('\n') != std::string_view::npos) {
    throw Error(ErrorCode::kInvalidParameter, "content type may not contain a newline");
  }
  const fs::path tmp = root_ / "tmp" / temp_name();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(content_type.data(), static_cast<std::streamsize>(content_type.size()));
    out.put('\n');
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw Error(ErrorCode::kStorageUnavailable, "write failed for " + std::string(key));
    }
  }
  // A concurrent remove may prune the parent directory between the mkdir
  // and the rename, so retry a few times.
  std::error_code ec;
  for (int attempt = 0; attempt < 5; ++attempt) {
    fs::create_directories(target.parent_path(), ec);
    if (ec) break;
    fs::rename(tmp, target, ec);
    if (!ec) return;
  }
  std::error_code ignored;
  fs::remove(tmp, ignored);
  unavailable("cannot store " + std::string(key), ec);
}

StoredObject LocalObjectStore::get(std::string_view key) const {
  const fs::path p = object_path(key);
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    std::error_code ec;
    if (!fs::exists(p, ec) && !ec) {
      throw Error(ErrorCode::kNotFound, "no object '" + std::string(key) + "'");
    }
    throw Error(ErrorCode::kStorageUnavailable, "cannot read " + std::string(key));
  }
  StoredObject obj;
  obj.key = std::string(key);
  std::getline(in, obj.content_type);
  obj.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kStorageUnavailable, "cannot read " + std::string(key));
  return obj;
}

void LocalObjectStore::remove(std::string_view key) {
  const fs::path p = object_path(key);
  std::error_code ec;
  fs::remove(p, ec);
  if (ec) unavailable("cannot delete " + std::string(key), ec);
  // Prune now-empty directories; failure just means something else lives there.
  const fs::path objects = root_ / "objects";
  for (fs::path dir = p.parent_path(); dir != objects && within(objects, dir);
       dir = dir.parent_path()) {
    if (!fs::remove(dir, ec)) break;
  }
}

std::vector<std::string> LocalObjectStore::list(std::string_view prefix) const {
  std::vector<std::string> keys;
  const fs::path objects = root_ / "objects";
  std::error_code ec;
  fs::recursive_directory_iterator it(objects, ec), end;
  if (ec) unavailable("cannot list storage", ec);
  for (; it != end; it.increment(ec)) {
    if (ec) {
      // Entries can vanish under concurrent deletes; skip them.
      ec.clear();
      continue;
    }
    if (!it->is_regular_file(ec)) continue;
    std::string rel = it->path().lexically_relative(objects).generic_string();
    if (rel.size() <= kSuffix.size() || !rel.ends_with(kSuffix)) continue;
    rel.resize(rel.size() - kSuffix.size());
    if (rel.starts_with(prefix)) keys.push_back(std::move(rel));
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace pq
