#pragma once

#include "maglens/volume.hpp"

#include <optional>
#include <string>
#include <vector>

namespace maglens {

// Layered "seabed" field with an optional buried ellipsoid. Fractions are
// voxel-center fractions k/(n-1) along each axis.
struct LayerBoundary {
  double z_end;  // layer extends down to this z fraction; the last layer to 1
  double value;
  bool operator==(const LayerBoundary&) const = default;
};

struct WreckEllipsoid {
  Vec3 center;      // fractions
  Vec3 semi_axes;   // fractions
  double delta = 0.0;
  bool operator==(const WreckEllipsoid& o) const {
    return center == o.center && semi_axes == o.semi_axes && delta == o.delta;
  }
};

class PhantomSpec {
 public:
  // Throws VolumeError if an invariant does not hold.
  PhantomSpec(Dims dims, std::vector<LayerBoundary> layers, std::optional<WreckEllipsoid> wreck,
              Vec3 spacing = Vec3::Constant(0.01), std::optional<Vec3> origin = std::nullopt);

  // 256x128x128 water/sediment/seabed/bedrock stack with a wreck buried in
  // the seabed layer, 1 cm voxels, centered on the world origin.
  static PhantomSpec default_spec();

  const Dims& dims() const { return dims_; }
  const std::vector<LayerBoundary>& layers() const { return layers_; }
  const std::optional<WreckEllipsoid>& wreck() const { return wreck_; }
  const Vec3& spacing() const { return spacing_; }
  // Defaults to centering the voxel-center box on the world origin.
  Vec3 origin() const;

  PhantomSpec without_wreck() const;
  PhantomSpec with_dims(Dims dims) const;

  // Structured text: one `phantom` record, one `layer` record per layer and
  // an optional `wreck` record.
  std::string serialize() const;
  static PhantomSpec parse(std::string_view text);

  // Wreck membership for voxel (x,y,z); false when there is no wreck.
  bool in_wreck(int x, int y, int z) const;
  // Layered base value at voxel row z (cosine-smoothed across 4-voxel bands).
  double base_value(int z) const;

  bool operator==(const PhantomSpec& o) const {
    return dims_ == o.dims_ && layers_ == o.layers_ && wreck_ == o.wreck_ &&
           spacing_ == o.spacing_ && origin_ == o.origin_;
  }

 private:
  Dims dims_;
  std::vector<LayerBoundary> layers_;
  std::optional<WreckEllipsoid> wreck_;
  Vec3 spacing_;
  std::optional<Vec3> origin_;
};

// Deterministic: the same spec always yields a bit-identical grid.
VolumeGrid generate_phantom(const PhantomSpec& spec);

}  // namespace maglens
