#include "maglens/phantom.hpp"

#include "maglens/record.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace maglens {

namespace {

constexpr double kBandVoxels = 4.0;

}  // namespace

PhantomSpec::PhantomSpec(Dims dims, std::vector<LayerBoundary> layers,
                         std::optional<WreckEllipsoid> wreck, Vec3 spacing,
                         std::optional<Vec3> origin)
    : dims_(dims), layers_(std::move(layers)), wreck_(wreck), spacing_(spacing), origin_(origin) {
  for (int d : dims_) {
    if (d < 2) throw VolumeError("phantom dims must be >= 2");
  }
  if (!(spacing_.minCoeff() > 0.0)) throw VolumeError("phantom spacing must be > 0");
  if (layers_.empty()) throw VolumeError("phantom needs at least one layer");
  double prev = 0.0;
  for (const auto& l : layers_) {
    if (!(l.z_end > prev && l.z_end <= 1.0)) {
      throw VolumeError("layer z fractions must be strictly increasing in (0,1]");
    }
    if (!(l.value >= 0.0 && l.value <= 1.0)) throw VolumeError("layer values must lie in [0,1]");
    prev = l.z_end;
  }
  if (wreck_) {
    for (int a = 0; a < 3; ++a) {
      const double c = wreck_->center[a];
      const double r = wreck_->semi_axes[a];
      if (!(r > 0.0) || c - r < 0.0 || c + r > 1.0) {
        throw VolumeError("wreck ellipsoid must lie inside the unit cube");
      }
    }
    for (const auto& l : layers_) {
      const double v = l.value + wreck_->delta;
      if (!(v >= 0.0 && v <= 1.0)) throw VolumeError("layer value + wreck delta leaves [0,1]");
    }
  }
}

PhantomSpec PhantomSpec::default_spec() {
  return PhantomSpec({256, 128, 128},
                     {{0.35, 0.15}, {0.55, 0.45}, {0.75, 0.65}, {1.0, 0.85}},
                     WreckEllipsoid{Vec3(0.5, 0.5, 0.62), Vec3(0.18, 0.06, 0.025), 0.02});
}

Vec3 PhantomSpec::origin() const {
  if (origin_) return *origin_;
  Vec3 o;
  for (int a = 0; a < 3; ++a) o[a] = -0.5 * (dims_[a] - 1) * spacing_[a];
  return o;
}

PhantomSpec PhantomSpec::without_wreck() const {
  return PhantomSpec(dims_, layers_, std::nullopt, spacing_, origin_);
}

PhantomSpec PhantomSpec::with_dims(Dims dims) const {
  return PhantomSpec(dims, layers_, wreck_, spacing_, origin_);
}

double PhantomSpec::base_value(int z) const {
  const double zf = static_cast<double>(z) / (dims_[2] - 1);
  const double zv = static_cast<double>(z);
  // Smooth bands centered on each internal boundary.
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    const double boundary = layers_[i].z_end * (dims_[2] - 1);
    if (std::abs(zv - boundary) < 0.5 * kBandVoxels) {
      const double s = (zv - (boundary - 0.5 * kBandVoxels)) / kBandVoxels;
      const double w = 0.5 * (1.0 - std::cos(std::numbers::pi * s));
      return layers_[i].value + (layers_[i + 1].value - layers_[i].value) * w;
    }
  }
  for (const auto& l : layers_) {
    if (zf <= l.z_end) return l.value;
  }
  return layers_.back().value;
}

bool PhantomSpec::in_wreck(int x, int y, int z) const {
  if (!wreck_) return false;
  const double f[3] = {static_cast<double>(x) / (dims_[0] - 1), static_cast<double>(y) / (dims_[1] - 1),
                       static_cast<double>(z) / (dims_[2] - 1)};
  double sum = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double u = (f[a] - wreck_->center[a]) / wreck_->semi_axes[a];
    sum += u * u;
  }
  return sum <= 1.0;
}

std::string PhantomSpec::serialize() const {
  std::vector<Record> records;
  Record head;
  head.keyword = "phantom";
  head.add("dims", std::array<double, 3>{double(dims_[0]), double(dims_[1]), double(dims_[2])});
  head.add("spacing", std::array<double, 3>{spacing_.x(), spacing_.y(), spacing_.z()});
  if (origin_) head.add("origin", std::array<double, 3>{origin_->x(), origin_->y(), origin_->z()});
  records.push_back(head);
  for (const auto& l : layers_) {
    Record r;
    r.keyword = "layer";
    r.add("z", l.z_end).add("value", l.value);
    records.push_back(r);
  }
  if (wreck_) {
    Record r;
    r.keyword = "wreck";
    r.add("center", std::array<double, 3>{wreck_->center.x(), wreck_->center.y(), wreck_->center.z()});
    r.add("axes", std::array<double, 3>{wreck_->semi_axes.x(), wreck_->semi_axes.y(),
                                        wreck_->semi_axes.z()});
    r.add("delta", wreck_->delta);
    records.push_back(r);
  }
  return format_records(records);
}

PhantomSpec PhantomSpec::parse(std::string_view text) {
  const auto records = parse_records(text);
  std::optional<Dims> dims;
  Vec3 spacing = Vec3::Constant(0.01);
  std::optional<Vec3> origin;
  std::vector<LayerBoundary> layers;
  std::optional<WreckEllipsoid> wreck;
  auto triple = [](const Record& r, std::string_view key) {
    const auto v = r.numbers(key);
    if (v.size() != 3) throw FormatError(r.line, std::string(key) + " needs 3 numbers");
    return Vec3(v[0], v[1], v[2]);
  };
  for (const auto& r : records) {
    if (r.keyword == "phantom") {
      const Vec3 d = triple(r, "dims");
      Dims out;
      for (int a = 0; a < 3; ++a) {
        if (d[a] != std::floor(d[a]) || d[a] < 2 || d[a] > 1 << 16) {
          throw FormatError(r.line, "phantom dims must be integers >= 2");
        }
        out[a] = static_cast<int>(d[a]);
      }
      dims = out;
      if (r.has("spacing")) spacing = triple(r, "spacing");
      if (r.has("origin")) origin = triple(r, "origin");
    } else if (r.keyword == "layer") {
      layers.push_back({r.number("z"), r.number("value")});
    } else if (r.keyword == "wreck") {
      wreck = WreckEllipsoid{triple(r, "center"), triple(r, "axes"), r.number("delta")};
    } else {
      throw FormatError(r.line, "unknown phantom record '" + r.keyword + "'");
    }
  }
  if (!dims) throw FormatError(0, "phantom spec has no 'phantom' record");
  try {
    return PhantomSpec(*dims, std::move(layers), wreck, spacing, origin);
  } catch (const VolumeError& e) {
    throw FormatError(0, e.what());
  }
}

VolumeGrid generate_phantom(const PhantomSpec& spec) {
  const Dims& d = spec.dims();
  std::vector<double> values(static_cast<std::size_t>(d[0]) * d[1] * d[2]);
  std::size_t i = 0;
  for (int z = 0; z < d[2]; ++z) {
    const double base = spec.base_value(z);
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        double v = base;
        if (spec.in_wreck(x, y, z)) v = std::clamp(base + spec.wreck()->delta, 0.0, 1.0);
        values[i++] = v;
      }
    }
  }
  return VolumeGrid(d, spec.spacing(), spec.origin(), std::move(values));
}

}  // namespace maglens
