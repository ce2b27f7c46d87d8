#pragma once

#include "maglens/geometry.hpp"
#include "maglens/kernels/sampling.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace maglens {

using Dims = std::array<int, 3>;

class VolumeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SizeMismatchError : public VolumeError {
 public:
  SizeMismatchError(std::uintmax_t expected, std::uintmax_t actual, const std::string& path);
  std::uintmax_t expected() const { return expected_; }
  std::uintmax_t actual() const { return actual_; }

 private:
  std::uintmax_t expected_;
  std::uintmax_t actual_;
};

class UnsupportedFormatError : public VolumeError {
 public:
  using VolumeError::VolumeError;
};

class DivisibilityError : public VolumeError {
 public:
  using VolumeError::VolumeError;
};

// Regular scalar grid, x-fastest storage, values in [0,1]. Immutable after
// construction; safe to share across render workers.
class VolumeGrid {
 public:
  // Throws VolumeError when any invariant is violated.
  VolumeGrid(Dims dims, Vec3 spacing, Vec3 origin, std::vector<double> values);

  const Dims& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  const Vec3& origin() const { return origin_; }
  std::span<const double> values() const { return values_; }
  std::size_t voxel_count() const { return values_.size(); }

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims_[1]) * z);
  }
  double at(int x, int y, int z) const { return values_[index(x, y, z)]; }
  Vec3 voxel_center(int x, int y, int z) const {
    return origin_ + Vec3(x * spacing_.x(), y * spacing_.y(), z * spacing_.z());
  }
  // Bounds of the voxel-center box; samples outside it are 0.
  Vec3 box_min() const { return origin_; }
  Vec3 box_max() const { return voxel_center(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1); }
  double min_spacing() const { return spacing_.minCoeff(); }

  kernels::GridView view() const;

 private:
  Dims dims_;
  Vec3 spacing_;
  Vec3 origin_;
  std::vector<double> values_;
};

enum class ScalarEncoding { U8, F32 };

struct VolumeMeta {
  Dims dims{2, 2, 2};
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();
  ScalarEncoding encoding = ScalarEncoding::U8;

  std::size_t element_size() const { return encoding == ScalarEncoding::U8 ? 1 : 4; }
  std::uintmax_t expected_bytes() const;

  std::string serialize() const;
  // Throws UnsupportedFormatError for unknown dtype, FormatError otherwise.
  static VolumeMeta parse(std::string_view text);
  static VolumeMeta load(const std::string& path);
};

// Reads a tightly packed little-endian RAW file. u8 values map to v/255,
// f32 values are clamped to [0,1].
VolumeGrid load_raw(const std::string& data_path, const VolumeMeta& meta);
void save_raw(const VolumeGrid& grid, const std::string& data_path, ScalarEncoding encoding);

// Trilinear interpolation; 0 outside the voxel-center bounding box.
double sample_trilinear(const VolumeGrid& grid, const Vec3& p);

// Central differences with step = spacing per axis, in value per meter.
Vec3 gradient_central(const VolumeGrid& grid, const Vec3& p);

// Box-filter mean over factor blocks; spacing scales by factor.
VolumeGrid downsample(const VolumeGrid& grid, Dims factor);

// Quantile (q in [0,1]) of the gradient magnitude over voxels whose
// central-difference stencil stays inside the grid. Used as the default
// normalization for the derivative lens effect.
double gradient_magnitude_quantile(const VolumeGrid& grid, double q);

}  // namespace maglens
