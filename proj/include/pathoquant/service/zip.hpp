#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pq {

struct ZipEntry {
  std::string name;
  std::vector<std::uint8_t> data;
};

/// Builds a deflate-compressed ZIP archive. Members are written in sorted
/// name order with a fixed 1980-01-01 00:00 timestamp, so equal inputs
/// give byte-identical archives.
std::vector<std::uint8_t> write_zip(std::vector<ZipEntry> entries);

}  // namespace pq
