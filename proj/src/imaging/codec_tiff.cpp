#include <zlib.h>

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "codecs.hpp"

namespace pq::detail {

namespace {

enum Tag : std::uint16_t {
  kImageWidth = 256,
  kImageLength = 257,
  kBitsPerSample = 258,
  kCompression = 259,
  kPhotometric = 262,
  kStripOffsets = 273,
  kSamplesPerPixel = 277,
  kRowsPerStrip = 278,
  kStripByteCounts = 279,
  kPlanarConfig = 284,
  kPredictor = 317,
  kColorMap = 320,
  kTileWidth = 322,
  kTileLength = 323,
  kTileOffsets = 324,
  kTileByteCounts = 325,
  kExtraSamples = 338,
};

enum Compression : std::uint32_t {
  kNone = 1,
  kLzw = 5,
  kDeflate = 8,
  kPackBits = 32773,
  kDeflateLegacy = 32946,
};

[[noreturn]] void corrupt(const std::string& what) {
  throw Error(ErrorCode::kCorruptImage, "TIFF: " + what);
}

[[noreturn]] void unsupported(const std::string& what) {
  throw Error(ErrorCode::kUnsupportedFormat, "TIFF: " + what);
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, bool little) : b_(bytes), little_(little) {}

  std::uint16_t u16(std::size_t at) const {
    need(at, 2);
    return little_ ? static_cast<std::uint16_t>(b_[at] | (b_[at + 1] << 8))
                   : static_cast<std::uint16_t>((b_[at] << 8) | b_[at + 1]);
  }
  std::uint32_t u32(std::size_t at) const {
    need(at, 4);
    if (little_) {
      return static_cast<std::uint32_t>(b_[at]) | (static_cast<std::uint32_t>(b_[at + 1]) << 8) |
             (static_cast<std::uint32_t>(b_[at + 2]) << 16) |
             (static_cast<std::uint32_t>(b_[at + 3]) << 24);
    }
    return (static_cast<std::uint32_t>(b_[at]) << 24) |
           (static_cast<std::uint32_t>(b_[at + 1]) << 16) |
           (static_cast<std::uint32_t>(b_[at + 2]) << 8) | static_cast<std::uint32_t>(b_[at + 3]);
  }
  std::span<const std::uint8_t> slice(std::size_t at, std::size_t n) const {
    need(at, n);
    return b_.subspan(at, n);
  }
  void need(std::size_t at, std::size_t n) const {
    if (at > b_.size() || n > b_.size() - at) corrupt("offset beyond end of file");
  }

 private:
  std::span<const std::uint8_t> b_;
  bool little_;
};

using TagValues = std::map<std::uint16_t, std::vector<std::uint32_t>>;

TagValues read_ifd(const Reader& r, std::uint32_t offset) {
  TagValues tags;
  const std::uint16_t count = r.u16(offset);
  for (std::uint16_t i = 0; i < count; ++i) {
    const std::size_t e = offset + 2 + static_cast<std::size_t>(i) * 12;
    const std::uint16_t tag = r.u16(e);
    const std::uint16_t type = r.u16(e + 2);
    const std::uint32_t n = r.u32(e + 4);
    std::size_t elem = 0;
    switch (type) {
      case 1: elem = 1; break;  // BYTE
      case 3: elem = 2; break;  // SHORT
      case 4: elem = 4; break;  // LONG
      default: continue;        // types we never need
    }
    if (n > (1u << 24)) corrupt("implausible tag count");
    const std::size_t total = elem * n;
    const std::size_t base = total <= 4 ? e + 8 : r.u32(e + 8);
    r.need(base, total);
    std::vector<std::uint32_t> values(n);
    for (std::uint32_t k = 0; k < n; ++k) {
      const std::size_t at = base + k * elem;
      values[k] = elem == 1 ? r.slice(at, 1)[0] : elem == 2 ? r.u16(at) : r.u32(at);
    }
    tags.emplace(tag, std::move(values));
  }
  return tags;
}

std::uint32_t scalar(const TagValues& tags, std::uint16_t tag, std::uint32_t fallback) {
  const auto it = tags.find(tag);
  if (it == tags.end() || it->second.empty()) return fallback;
  return it->second.front();
}

const std::vector<std::uint32_t>& required(const TagValues& tags, std::uint16_t tag,
                                           const char* name) {
  const auto it = tags.find(tag);
  if (it == tags.end() || it->second.empty()) corrupt(std::string("missing ") + name);
  return it->second;
}

void lzw_decode(std::span<const std::uint8_t> in, std::vector<std::uint8_t>& out,
                std::size_t expected) {
  constexpr int kClear = 256;
  constexpr int kEoi = 257;
  std::vector<std::vector<std::uint8_t>> table;
  auto reset = [&] {
    table.assign(258, {});
    for (int i = 0; i < 256; ++i) table[i] = {static_cast<std::uint8_t>(i)};
  };
  reset();

  std::size_t bitpos = 0;
  int width = 9;
  auto read_code = [&]() -> int {
    if (bitpos + width > in.size() * 8) return kEoi;
    int code = 0;
    for (int k = 0; k < width; ++k) {
      const std::size_t bit = bitpos + k;
      code = (code << 1) | ((in[bit >> 3] >> (7 - (bit & 7))) & 1);
    }
    bitpos += width;
    return code;
  };

  int prev = -1;
  while (out.size() < expected) {
    const int code = read_code();
    if (code == kEoi) break;
    if (code == kClear) {
      reset();
      width = 9;
      prev = -1;
      continue;
    }
    std::vector<std::uint8_t> entry;
    if (code < static_cast<int>(table.size())) {
      entry = table[code];
      if (prev >= 0) {
        auto added = table[prev];
        added.push_back(entry.front());
        table.push_back(std::move(added));
      }
    } else if (code == static_cast<int>(table.size()) && prev >= 0) {
      entry = table[prev];
      entry.push_back(entry.front());
      table.push_back(entry);
    } else {
      corrupt("invalid LZW code");
    }
    out.insert(out.end(), entry.begin(), entry.end());
    prev = code;
    if (static_cast<int>(table.size()) + 1 >= (1 << width) && width < 12) ++width;
  }
}

void inflate_block(std::span<const std::uint8_t> in, std::vector<std::uint8_t>& out,
                   std::size_t expected) {
  out.resize(expected);
  uLongf produced = static_cast<uLongf>(expected);
  const int rc = uncompress(out.data(), &produced, in.data(), static_cast<uLong>(in.size()));
  if (rc != Z_OK && rc != Z_BUF_ERROR) corrupt("Deflate stream is invalid");
  out.resize(produced);
}

void packbits_decode(std::span<const std::uint8_t> in, std::vector<std::uint8_t>& out,
                     std::size_t expected) {
  std::size_t i = 0;
  while (i < in.size() && out.size() < expected) {
    const auto n = static_cast<std::int8_t>(in[i++]);
    if (n >= 0) {
      const std::size_t len = static_cast<std::size_t>(n) + 1;
      if (i + len > in.size()) corrupt("PackBits literal run truncated");
      out.insert(out.end(), in.begin() + i, in.begin() + i + len);
      i += len;
    } else if (n != -128) {
      if (i >= in.size()) corrupt("PackBits repeat run truncated");
      out.insert(out.end(), static_cast<std::size_t>(1 - n), in[i++]);
    }
  }
}

std::vector<std::uint8_t> decompress(std::uint32_t compression, std::span<const std::uint8_t> in,
                                     std::size_t expected) {
  std::vector<std::uint8_t> out;
  out.reserve(expected);
  switch (compression) {
    case kNone: out.assign(in.begin(), in.begin() + std::min(in.size(), expected)); break;
    case kLzw: lzw_decode(in, out, expected); break;
    case kDeflate:
    case kDeflateLegacy: inflate_block(in, out, expected); break;
    case kPackBits: packbits_decode(in, out, expected); break;
    default: unsupported("compression " + std::to_string(compression));
  }
  if (out.size() < expected) corrupt("block decompressed to fewer bytes than declared");
  out.resize(expected);
  return out;
}

void undo_horizontal_predictor(std::vector<std::uint8_t>& block, std::size_t row_samples,
                               std::size_t spp) {
  for (std::size_t row = 0; row + row_samples <= block.size(); row += row_samples) {
    for (std::size_t i = spp; i < row_samples; ++i) {
      block[row + i] = static_cast<std::uint8_t>(block[row + i] + block[row + i - spp]);
    }
  }
}

}  // namespace

// Baseline TIFF subset: first IFD only, 8 bits per sample, chunky planar
// layout, strips or tiles, uncompressed / LZW / Deflate / PackBits.
RasterImage decode_tiff(std::span<const std::uint8_t> bytes, const ImageLimits& limits) {
  if (bytes.size() < 8) corrupt("header truncated");
  const bool little = bytes[0] == 'I';
  const Reader r(bytes, little);
  if (r.u16(2) != 42) {
    unsupported("only classic (non-BigTIFF) files are supported");
  }
  const TagValues tags = read_ifd(r, r.u32(4));

  const long long width = scalar(tags, kImageWidth, 0);
  const long long height = scalar(tags, kImageLength, 0);
  check_limits(width, height, limits, "TIFF");

  const std::uint32_t spp = scalar(tags, kSamplesPerPixel, 1);
  const std::uint32_t photometric = scalar(tags, kPhotometric, 1);
  const std::uint32_t compression = scalar(tags, kCompression, kNone);
  const std::uint32_t predictor = scalar(tags, kPredictor, 1);
  const std::uint32_t planar = scalar(tags, kPlanarConfig, 1);
  const std::uint32_t extra = scalar(tags, kExtraSamples, 0);

  if (spp < 1 || spp > 4) unsupported("samples per pixel " + std::to_string(spp));
  if (const auto it = tags.find(kBitsPerSample); it != tags.end()) {
    for (std::uint32_t bps : it->second) {
      if (bps != 8) unsupported(std::to_string(bps) + "-bit samples");
    }
  } else {
    unsupported("bilevel images");
  }
  if (planar != 1 && spp > 1) unsupported("planar (separate) sample layout");
  if (predictor != 1 && predictor != 2) unsupported("floating-point predictor");

  const bool gray = photometric == 0 || photometric == 1;
  const bool rgb = photometric == 2;
  const bool palette = photometric == 3;
  if (!gray && !rgb && !palette) {
    unsupported("photometric interpretation " + std::to_string(photometric));
  }
  if ((gray || palette) && spp > 2) corrupt("too many samples for grayscale/palette");
  if (rgb && spp < 3) corrupt("RGB image with fewer than 3 samples");
  const std::uint32_t color_samples = rgb ? 3 : 1;
  const bool has_alpha = spp > color_samples && (extra == 1 || extra == 2);
  const bool premultiplied = extra == 1;

  std::vector<std::uint32_t> colormap;
  if (palette) {
    colormap = required(tags, kColorMap, "ColorMap");
    if (colormap.size() < 3 * 256) corrupt("ColorMap too short");
  }

  // Assemble interleaved samples for the whole image.
  const auto w = static_cast<std::size_t>(width);
  const auto h = static_cast<std::size_t>(height);
  std::vector<std::uint8_t> samples(w * h * spp);

  if (tags.contains(kTileWidth)) {
    const std::size_t tw = scalar(tags, kTileWidth, 0);
    const std::size_t th = scalar(tags, kTileLength, 0);
    if (tw == 0 || th == 0) corrupt("zero tile size");
    const auto& offsets = required(tags, kTileOffsets, "TileOffsets");
    const auto& counts = required(tags, kTileByteCounts, "TileByteCounts");
    const std::size_t across = (w + tw - 1) / tw;
    const std::size_t down = (h + th - 1) / th;
    if (offsets.size() < across * down || counts.size() < offsets.size()) {
      corrupt("tile table too short");
    }
    for (std::size_t ty = 0; ty < down; ++ty) {
      for (std::size_t tx = 0; tx < across; ++tx) {
        const std::size_t t = ty * across + tx;
        auto block = decompress(compression, r.slice(offsets[t], counts[t]), tw * th * spp);
        if (predictor == 2) undo_horizontal_predictor(block, tw * spp, spp);
        for (std::size_t y = 0; y < th && ty * th + y < h; ++y) {
          const std::size_t cols = std::min(tw, w - tx * tw);
          std::copy_n(block.begin() + y * tw * spp, cols * spp,
                      samples.begin() + ((ty * th + y) * w + tx * tw) * spp);
        }
      }
    }
  } else {
    const auto& offsets = required(tags, kStripOffsets, "StripOffsets");
    const auto& counts = required(tags, kStripByteCounts, "StripByteCounts");
    const std::size_t rps = std::min<std::size_t>(scalar(tags, kRowsPerStrip, height), h);
    if (rps == 0) corrupt("zero RowsPerStrip");
    const std::size_t strips = (h + rps - 1) / rps;
    if (offsets.size() < strips || counts.size() < strips) corrupt("strip table too short");
    for (std::size_t s = 0; s < strips; ++s) {
      const std::size_t rows = std::min(rps, h - s * rps);
      auto block = decompress(compression, r.slice(offsets[s], counts[s]), rows * w * spp);
      if (predictor == 2) undo_horizontal_predictor(block, w * spp, spp);
      std::copy(block.begin(), block.end(), samples.begin() + s * rps * w * spp);
    }
  }

  std::vector<std::uint8_t> out(w * h * 3);
  for (std::size_t i = 0; i < w * h; ++i) {
    const std::uint8_t* s = samples.data() + i * spp;
    std::uint8_t c[3];
    if (rgb) {
      c[0] = s[0];
      c[1] = s[1];
      c[2] = s[2];
    } else if (palette) {
      for (int k = 0; k < 3; ++k) c[k] = static_cast<std::uint8_t>(colormap[k * 256 + s[0]] >> 8);
    } else {
      const std::uint8_t v = photometric == 0 ? static_cast<std::uint8_t>(255 - s[0]) : s[0];
      c[0] = c[1] = c[2] = v;
    }
    if (has_alpha) {
      const std::uint8_t a = s[color_samples];
      for (auto& v : c) {
        v = premultiplied ? static_cast<std::uint8_t>(std::min(255, v + (255 - a)))
                          : over_white(v, a);
      }
    }
    std::copy_n(c, 3, out.begin() + i * 3);
  }
  return RasterImage(static_cast<int>(w), static_cast<int>(h), std::move(out));
}

}  // namespace pq::detail
