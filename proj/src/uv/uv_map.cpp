#include "uvcloth/uv/uv_map.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "uvcloth/error.hpp"

namespace uvcloth::uv {

static_assert(std::endian::native == std::endian::little,
              "UVMP/UVCK writers assume a little-endian host");

const char* case_name(CaseTag tag) {
  switch (tag) {
    case CaseTag::kCase1: return "CASE1";
    case CaseTag::kCase2: return "CASE2";
    case CaseTag::kBiDistance: return "BIDISTANCE";
  }
  return "UNKNOWN";
}

UVMap::UVMap(int resolution, int channels, CaseTag tag)
    : resolution_(resolution), channels_(channels), case_tag_(tag) {
  if (resolution <= 0) throw DimensionError("UVMap resolution must be positive");
  if (channels != 1 && channels != 3) throw DimensionError("UVMap channels must be 1 or 3");
  data_.assign(static_cast<std::size_t>(channels) * texel_count(), 0.0f);
  mask_.assign(texel_count(), 0);
}

std::size_t UVMap::mask_count() const {
  return static_cast<std::size_t>(std::count_if(mask_.begin(), mask_.end(),
                                                [](std::uint8_t m) { return m != 0; }));
}

std::pair<int, int> texel_of(const geom::Vec2& uv, int resolution) {
  const int x = std::clamp(static_cast<int>(std::floor(uv.x() * resolution)), 0, resolution - 1);
  const int y = std::clamp(static_cast<int>(std::floor(uv.y() * resolution)), 0, resolution - 1);
  return {x, y};
}

bool UVMap::sample(const geom::Vec2& uv, std::span<float> out) const {
  const double fx = uv.x() * resolution_ - 0.5;
  const double fy = uv.y() * resolution_ - 0.5;
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const double tx = fx - x0;
  const double ty = fy - y0;
  double acc[3] = {0, 0, 0};
  double wsum = 0.0;
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const int x = x0 + dx;
      const int y = y0 + dy;
      if (x < 0 || y < 0 || x >= resolution_ || y >= resolution_ || !masked(x, y)) continue;
      const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty);
      if (w <= 0.0) continue;
      for (int c = 0; c < channels_; ++c) acc[c] += w * at(c, x, y);
      wsum += w;
    }
  }
  if (wsum <= 0.0) {
    // Exactly on a masked texel center the bilinear weights of the
    // neighbours vanish; fall back to the containing texel.
    const auto [x, y] = texel_of(uv, resolution_);
    if (!masked(x, y)) return false;
    for (int c = 0; c < channels_; ++c) out[c] = at(c, x, y);
    return true;
  }
  for (int c = 0; c < channels_; ++c) out[c] = static_cast<float>(acc[c] / wsum);
  return true;
}

namespace {

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t& pos) {
  if (pos + 4 > b.size()) throw ParseError("UVMP truncated", 0);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_uvmp(const UVMap& map) {
  std::vector<std::uint8_t> b = {'U', 'V', 'M', 'P'};
  put_u32(b, 1);
  put_u32(b, static_cast<std::uint32_t>(map.resolution()));
  put_u32(b, static_cast<std::uint32_t>(map.channels()));
  b.push_back(static_cast<std::uint8_t>(map.case_tag()));
  const std::size_t n = map.texel_count();
  std::vector<std::uint8_t> bits((n + 7) / 8, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (map.mask()[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  b.insert(b.end(), bits.begin(), bits.end());
  const std::size_t off = b.size();
  b.resize(off + map.data().size() * 4);
  std::memcpy(b.data() + off, map.data().data(), map.data().size() * 4);
  return b;
}

UVMap decode_uvmp(std::span<const std::uint8_t> b) {
  if (b.size() < 17 || std::memcmp(b.data(), "UVMP", 4) != 0) {
    throw ParseError("not a UVMP file", 0);
  }
  std::size_t pos = 4;
  const std::uint32_t version = get_u32(b, pos);
  if (version != 1) throw ParseError("unsupported UVMP version " + std::to_string(version), 0);
  const std::uint32_t R = get_u32(b, pos);
  const std::uint32_t C = get_u32(b, pos);
  const auto tag = static_cast<CaseTag>(b[pos++]);
  if (R == 0 || R > 8192) throw ParseError("UVMP resolution out of range", 0);
  UVMap map(static_cast<int>(R), static_cast<int>(C), tag);
  const std::size_t n = map.texel_count();
  const std::size_t mask_bytes = (n + 7) / 8;
  if (b.size() != pos + mask_bytes + 4 * n * C) throw ParseError("UVMP size mismatch", 0);
  for (std::size_t i = 0; i < n; ++i) map.mask()[i] = (b[pos + i / 8] >> (i % 8)) & 1u;
  pos += mask_bytes;
  std::memcpy(map.data().data(), b.data() + pos, 4 * n * C);
  return map;
}

void save_uvmp(const UVMap& map, const std::filesystem::path& path) {
  const auto bytes = encode_uvmp(map);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

UVMap load_uvmp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_uvmp(bytes);
}

}  // namespace uvcloth::uv
