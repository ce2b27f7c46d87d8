#pragma once

#include "maglens/interaction.hpp"
#include "maglens/phantom.hpp"
#include "maglens/render.hpp"
#include "maglens/scene.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace maglens::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

std::string source_dir();

// --- random generation -------------------------------------------------------

Vec3 random_unit(std::mt19937_64& rng);
Quat random_quat(std::mt19937_64& rng);
Pose random_pose(std::mt19937_64& rng, double extent);
Lens random_lens(std::mt19937_64& rng, std::uint32_t id, double extent);

// Grid sampled from f at voxel centers.
VolumeGrid make_grid(Dims dims, Vec3 spacing, Vec3 origin, const std::function<double(const Vec3&)>& f);

// --- oracles -----------------------------------------------------------------

// Ray against a disc given by center, rotation matrix (columns are the local
// axes) and radius, using the textbook plane equation with the normal read
// from the matrix and membership by 3D distance.
struct OracleHit {
  double t;
  bool front;
};
std::optional<OracleHit> oracle_disc_hit(const Vec3& center, const Eigen::Matrix3d& rotation, double radius,
                                         const Vec3& origin, const Vec3& dir);
std::optional<OracleHit> oracle_disc_hit(const Lens& lens, const Vec3& origin, const Vec3& dir);

// Nearest lens hit by the controller's -Z ray within range, ties by id.
std::optional<LensId> oracle_raycast(const std::vector<Lens>& lenses, const Pose& controller, double range);

// Closest point of a disc to p by dense polar sampling refined analytically.
double oracle_disc_distance(const Lens& lens, const Vec3& p);

// Independent trilinear sampler (own indexing, 0 outside the voxel-center box).
double oracle_sample(const VolumeGrid& grid, const Vec3& p);

// Independent plain-DVR renderer: own camera rays, slab test, sampler,
// front-to-back compositing with opacity correction through pow().
Framebuffer reference_render(const VolumeGrid& grid, const Camera& camera, const TransferFunction& tf,
                             double step, Rgb background = kDefaultBackground);

// Pixels covered by the projection of the spec's wreck ellipsoid, found by
// projecting a dense point cloud of the solid ellipsoid.
std::vector<bool> wreck_projection_mask(const PhantomSpec& spec, const Camera& camera);

std::vector<bool> dilate(const std::vector<bool>& mask, int width, int height, int radius);

// --- events ------------------------------------------------------------------

InputEvent quiet_event(double t, const Pose& head = {});

// A short script over a small phantom: opens the menu, creates a MIP lens,
// takes two snapshots and asserts on the result. All assertions pass.
std::string tiny_session_script();

// --- reducer properties --------------------------------------------------------

struct FuzzReport {
  std::size_t events = 0;
  std::size_t rejected = 0;
  std::size_t structural = 0;
  std::map<std::string, std::size_t> feedback;  // by code
  std::size_t violations = 0;
  std::string first_violation;
};

// Random hand walks over a few lenses and the menu with random button edges
// and occasional invalid events. Checks scene invariants, mode consistency,
// grab rigidity, the resize law, rejection of invalid events and, every
// `determinism_every` events, that re-running the step gives the same result.
FuzzReport reducer_fuzz(std::uint64_t seed, std::size_t events, std::size_t determinism_every = 97);

struct SnapSweepReport {
  std::size_t trials = 0;
  std::size_t snapped = 0;
  std::size_t mismatches = 0;  // combine early, late, or with the wrong pose
  std::string first_failure;
};

// Drags a held lens toward a partner in small steps; the combine must happen
// on the first frame the overlap predicate holds and never before.
SnapSweepReport snap_sweep(std::uint64_t seed, std::size_t trials);

}  // namespace maglens::testing
