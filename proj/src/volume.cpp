#include "maglens/volume.hpp"

#include "maglens/record.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

namespace maglens {

SizeMismatchError::SizeMismatchError(std::uintmax_t expected, std::uintmax_t actual,
                                     const std::string& path)
    : VolumeError("size mismatch for '" + path + "': expected " + std::to_string(expected) +
                  " bytes, found " + std::to_string(actual)),
      expected_(expected),
      actual_(actual) {}

VolumeGrid::VolumeGrid(Dims dims, Vec3 spacing, Vec3 origin, std::vector<double> values)
    : dims_(dims), spacing_(spacing), origin_(origin), values_(std::move(values)) {
  for (int d : dims_) {
    if (d < 1) throw VolumeError("grid dimensions must be positive");
  }
  const auto expected = static_cast<std::uintmax_t>(dims_[0]) * dims_[1] * dims_[2];
  if (expected > static_cast<std::uintmax_t>(std::numeric_limits<int>::max())) {
    throw VolumeError("grid has more than 2^31 voxels");
  }
  if (values_.size() != expected) {
    throw VolumeError("grid value count " + std::to_string(values_.size()) +
                      " does not match dims product " + std::to_string(expected));
  }
  for (int a = 0; a < 3; ++a) {
    if (!(spacing_[a] > 0.0) || !std::isfinite(spacing_[a])) {
      throw VolumeError("grid spacing must be positive and finite");
    }
    if (!std::isfinite(origin_[a])) throw VolumeError("grid origin must be finite");
  }
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) throw VolumeError("grid values must lie in [0,1]");
  }
}

kernels::GridView VolumeGrid::view() const {
  kernels::GridView v;
  v.values = values_.data();
  v.nx = dims_[0];
  v.ny = dims_[1];
  v.nz = dims_[2];
  v.ox = origin_.x();
  v.oy = origin_.y();
  v.oz = origin_.z();
  v.sx = spacing_.x();
  v.sy = spacing_.y();
  v.sz = spacing_.z();
  return v;
}

// ---------------------------------------------------------------------------
// Metadata

std::uintmax_t VolumeMeta::expected_bytes() const {
  return static_cast<std::uintmax_t>(dims[0]) * dims[1] * dims[2] * element_size();
}

std::string VolumeMeta::serialize() const {
  Record r;
  r.keyword = "volume";
  const std::array<double, 3> d{double(dims[0]), double(dims[1]), double(dims[2])};
  r.add("dims", d);
  r.add("spacing", std::array<double, 3>{spacing.x(), spacing.y(), spacing.z()});
  r.add("origin", std::array<double, 3>{origin.x(), origin.y(), origin.z()});
  r.add("dtype", std::string(encoding == ScalarEncoding::U8 ? "u8" : "f32"));
  return r.to_line() + "\n";
}

VolumeMeta VolumeMeta::parse(std::string_view text) {
  const auto records = parse_records(text);
  const Record* rec = nullptr;
  for (const auto& r : records) {
    if (r.keyword == "volume") rec = &r;
  }
  if (!rec) throw FormatError(0, "metadata has no 'volume' record");

  VolumeMeta meta;
  const auto dims = rec->numbers("dims");
  if (dims.size() != 3) throw FormatError(rec->line, "dims needs 3 integers");
  for (int a = 0; a < 3; ++a) {
    if (dims[a] != std::floor(dims[a]) || dims[a] < 2 || dims[a] > 1 << 20) {
      throw FormatError(rec->line, "each dim must be an integer >= 2");
    }
    meta.dims[a] = static_cast<int>(dims[a]);
  }
  if (rec->has("spacing")) {
    const auto s = rec->numbers("spacing");
    if (s.size() != 3) throw FormatError(rec->line, "spacing needs 3 numbers");
    meta.spacing = Vec3(s[0], s[1], s[2]);
    if (!(meta.spacing.minCoeff() > 0.0)) throw FormatError(rec->line, "spacing must be > 0");
  }
  if (rec->has("origin")) {
    const auto o = rec->numbers("origin");
    if (o.size() != 3) throw FormatError(rec->line, "origin needs 3 numbers");
    meta.origin = Vec3(o[0], o[1], o[2]);
  }
  const auto dtype = rec->text("dtype");
  if (dtype == "u8") {
    meta.encoding = ScalarEncoding::U8;
  } else if (dtype == "f32") {
    meta.encoding = ScalarEncoding::F32;
  } else {
    throw UnsupportedFormatError("unsupported scalar encoding '" + std::string(dtype) +
                                 "' (expected u8 or f32)");
  }
  return meta;
}

VolumeMeta VolumeMeta::load(const std::string& path) { return parse(read_text_file(path)); }

// ---------------------------------------------------------------------------
// RAW I/O

VolumeGrid load_raw(const std::string& data_path, const VolumeMeta& meta) {
  std::error_code ec;
  const auto actual = std::filesystem::file_size(data_path, ec);
  if (ec) throw VolumeError("cannot read '" + data_path + "': " + ec.message());
  const auto expected = meta.expected_bytes();
  if (actual != expected) throw SizeMismatchError(expected, actual, data_path);

  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw VolumeError("cannot open '" + data_path + "'");
  std::vector<unsigned char> bytes(static_cast<std::size_t>(expected));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw VolumeError("short read from '" + data_path + "'");

  const std::size_t count = bytes.size() / meta.element_size();
  std::vector<double> values(count);
  if (meta.encoding == ScalarEncoding::U8) {
    for (std::size_t i = 0; i < count; ++i) values[i] = bytes[i] / 255.0;
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + 4 * i, 4);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      float f;
      std::memcpy(&f, &bits, 4);
      const double v = static_cast<double>(f);
      values[i] = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
    }
  }
  return VolumeGrid(meta.dims, meta.spacing, meta.origin, std::move(values));
}

void save_raw(const VolumeGrid& grid, const std::string& data_path, ScalarEncoding encoding) {
  std::ofstream out(data_path, std::ios::binary);
  if (!out) throw VolumeError("cannot write '" + data_path + "'");
  const auto values = grid.values();
  if (encoding == ScalarEncoding::U8) {
    std::vector<unsigned char> bytes(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      bytes[i] = static_cast<unsigned char>(std::lround(values[i] * 255.0));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  } else {
    std::vector<unsigned char> bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const float f = static_cast<float>(values[i]);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      std::memcpy(bytes.data() + 4 * i, &bits, 4);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw VolumeError("write failed for '" + data_path + "'");
}

// ---------------------------------------------------------------------------
// Sampling

double sample_trilinear(const VolumeGrid& grid, const Vec3& p) {
  return kernels::sample_point(grid.view(), p.x(), p.y(), p.z());
}

Vec3 gradient_central(const VolumeGrid& grid, const Vec3& p) {
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 hi = p, lo = p;
    hi[a] += grid.spacing()[a];
    lo[a] -= grid.spacing()[a];
    g[a] = (sample_trilinear(grid, hi) - sample_trilinear(grid, lo)) / (2.0 * grid.spacing()[a]);
  }
  return g;
}

VolumeGrid downsample(const VolumeGrid& grid, Dims factor) {
  const Dims& d = grid.dims();
  Dims out_dims;
  for (int a = 0; a < 3; ++a) {
    if (factor[a] < 1 || d[a] % factor[a] != 0) {
      throw DivisibilityError("axis " + std::to_string(a) + ": dim " + std::to_string(d[a]) +
                              " is not divisible by factor " + std::to_string(factor[a]));
    }
    out_dims[a] = d[a] / factor[a];
  }
  const double count = double(factor[0]) * factor[1] * factor[2];
  std::vector<double> values(static_cast<std::size_t>(out_dims[0]) * out_dims[1] * out_dims[2]);
  std::size_t o = 0;
  for (int z = 0; z < out_dims[2]; ++z) {
    for (int y = 0; y < out_dims[1]; ++y) {
      for (int x = 0; x < out_dims[0]; ++x) {
        double sum = 0.0;
        for (int dz = 0; dz < factor[2]; ++dz) {
          for (int dy = 0; dy < factor[1]; ++dy) {
            for (int dx = 0; dx < factor[0]; ++dx) {
              sum += grid.at(x * factor[0] + dx, y * factor[1] + dy, z * factor[2] + dz);
            }
          }
        }
        values[o++] = std::clamp(sum / count, 0.0, 1.0);
      }
    }
  }
  Vec3 spacing = grid.spacing();
  Vec3 origin = grid.origin();
  for (int a = 0; a < 3; ++a) {
    origin[a] += 0.5 * (factor[a] - 1) * spacing[a];
    spacing[a] *= factor[a];
  }
  return VolumeGrid(out_dims, spacing, origin, std::move(values));
}

double gradient_magnitude_quantile(const VolumeGrid& grid, double q) {
  const Dims& d = grid.dims();
  if (d[0] < 3 || d[1] < 3 || d[2] < 3) return 0.0;
  const Vec3 two_h = 2.0 * grid.spacing();
  std::vector<double> mags;
  mags.reserve(static_cast<std::size_t>(d[0] - 2) * (d[1] - 2) * (d[2] - 2));
  for (int z = 1; z < d[2] - 1; ++z) {
    for (int y = 1; y < d[1] - 1; ++y) {
      for (int x = 1; x < d[0] - 1; ++x) {
        const double gx = (grid.at(x + 1, y, z) - grid.at(x - 1, y, z)) / two_h.x();
        const double gy = (grid.at(x, y + 1, z) - grid.at(x, y - 1, z)) / two_h.y();
        const double gz = (grid.at(x, y, z + 1) - grid.at(x, y, z - 1)) / two_h.z();
        mags.push_back(std::sqrt(gx * gx + gy * gy + gz * gz));
      }
    }
  }
  q = std::clamp(q, 0.0, 1.0);
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(mags.size() - 1)));
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end());
  return mags[k];
}

}  // namespace maglens
