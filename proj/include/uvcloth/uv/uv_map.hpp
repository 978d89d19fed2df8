#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "uvcloth/geom/mesh.hpp"

namespace uvcloth::uv {

enum class CaseTag : std::uint8_t {
  /// Garment homotopic to the body surface, mapped through the body atlas.
  kCase1 = 1,
  /// Garment around the lower body, mapped through cylindrical coordinates.
  kCase2 = 2,
  /// Bi-distance map stored in the UVMP container.
  kBiDistance = 255,
};

const char* case_name(CaseTag tag);

/// R×R grid with C float planes and a binary coverage mask. Texel (x, y)
/// covers uv in [x/R, (x+1)/R) × [y/R, (y+1)/R); planes are stored row-major
/// with y as the row.
class UVMap {
 public:
  UVMap() = default;
  UVMap(int resolution, int channels, CaseTag tag);

  int resolution() const { return resolution_; }
  int channels() const { return channels_; }
  CaseTag case_tag() const { return case_tag_; }
  void set_case_tag(CaseTag t) { case_tag_ = t; }

  std::size_t texel_count() const { return static_cast<std::size_t>(resolution_) * resolution_; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * resolution_ + x; }

  float& at(int c, int x, int y) { return data_[c * texel_count() + index(x, y)]; }
  float at(int c, int x, int y) const { return data_[c * texel_count() + index(x, y)]; }
  std::span<float> plane(int c) { return {data_.data() + c * texel_count(), texel_count()}; }
  std::span<const float> plane(int c) const {
    return {data_.data() + c * texel_count(), texel_count()};
  }
  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  std::vector<std::uint8_t>& mask() { return mask_; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  bool masked(int x, int y) const { return mask_[index(x, y)] != 0; }
  std::size_t mask_count() const;

  /// Mask-aware bilinear sample at uv: only masked taps contribute and their
  /// weights are renormalized. Returns false when no tap is masked.
  bool sample(const geom::Vec2& uv, std::span<float> out) const;

  bool operator==(const UVMap& o) const = default;

 private:
  int resolution_ = 0;
  int channels_ = 0;
  CaseTag case_tag_ = CaseTag::kCase1;
  std::vector<float> data_;
  std::vector<std::uint8_t> mask_;
};

/// Texel containing uv (clamped to the grid).
std::pair<int, int> texel_of(const geom::Vec2& uv, int resolution);

/// UVMP container: "UVMP", u32 version = 1, u32 R, u32 C, u8 case tag, the
/// mask as R·R bits (LSB first, padded to a byte), then C planes of R·R
/// little-endian float32.
void save_uvmp(const UVMap& map, const std::filesystem::path& path);
UVMap load_uvmp(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_uvmp(const UVMap& map);
UVMap decode_uvmp(std::span<const std::uint8_t> bytes);

}  // namespace uvcloth::uv
