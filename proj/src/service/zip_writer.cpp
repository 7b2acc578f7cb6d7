#include <zlib.h>

#include <algorithm>
#include <limits>

#include "pathoquant/error.hpp"
#include "pathoquant/service/zip.hpp"

namespace pq {

namespace {

constexpr std::uint16_t kDosTime = 0;                         // 00:00:00
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;  // 1980-01-01
constexpr std::uint16_t kVersion = 20;
constexpr std::uint16_t kDeflate = 8;

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::vector<std::uint8_t> raw_deflate(const std::vector<std::uint8_t>& data) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) !=
      Z_OK) {
    throw Error(ErrorCode::kInternal, "deflateInit2 failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(data.size())));
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::kInternal, "deflate failed");
  out.resize(produced);
  return out;
}

struct CentralRecord {
  std::string name;
  std::uint32_t crc;
  std::uint32_t compressed;
  std::uint32_t size;
  std::uint32_t offset;
};

}  // namespace

std::vector<std::uint8_t> write_zip(std::vector<ZipEntry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const ZipEntry& a, const ZipEntry& b) { return a.name < b.name; });
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (entries.size() > 0xFFFF) throw Error(ErrorCode::kInvalidParameter, "too many zip members");

  std::vector<std::uint8_t> out;
  std::vector<CentralRecord> central;
  for (const ZipEntry& e : entries) {
    if (e.name.empty() || e.name.size() > 0xFFFF || e.data.size() >= kMax) {
      throw Error(ErrorCode::kInvalidParameter, "zip member '" + e.name + "' is not storable");
    }
    const auto packed = raw_deflate(e.data);
    CentralRecord rec{e.name,
                      static_cast<std::uint32_t>(
                          crc32(0L, e.data.data(), static_cast<uInt>(e.data.size()))),
                      static_cast<std::uint32_t>(packed.size()),
                      static_cast<std::uint32_t>(e.data.size()),
                      static_cast<std::uint32_t>(out.size())};
    put32(out, 0x04034b50);
    put16(out, kVersion);
    put16(out, 0);
    put16(out, kDeflate);
    put16(out, kDosTime);
    put16(out, kDosDate);
    put32(out, rec.crc);
    put32(out, rec.compressed);
    put32(out, rec.size);
    put16(out, static_cast<std::uint16_t>(e.name.size()));
    put16(out, 0);
    out.insert(out.end(), e.name.begin(), e.name.end());
    out.insert(out.end(), packed.begin(), packed.end());
    central.push_back(std::move(rec));
  }

  const auto cd_offset = static_cast<std::uint32_t>(out.size());
  for (const CentralRecord& rec : central) {
    put32(out, 0x02014b50);
    put16(out, kVersion);
    put16(out, kVersion);
    put16(out, 0);
    put16(out, kDeflate);
    put16(out, kDosTime);
    put16(out, kDosDate);
    put32(out, rec.crc);
    put32(out, rec.compressed);
    put32(out, rec.size);
    put16(out, static_cast<std::uint16_t>(rec.name.size()));
    put16(out, 0);  // extra
    put16(out, 0);  // comment
    put16(out, 0);  // disk
    put16(out, 0);  // internal attributes
    put32(out, 0);  // external attributes
    put32(out, rec.offset);
    out.insert(out.end(), rec.name.begin(), rec.name.end());
  }
  const auto cd_size = static_cast<std::uint32_t>(out.size() - cd_offset);
  put32(out, 0x06054b50);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(central.size()));
  put16(out, static_cast<std::uint16_t>(central.size()));
  put32(out, cd_size);
  put32(out, cd_offset);
  put16(out, 0);
  return out;
}

}  // namespace pq
