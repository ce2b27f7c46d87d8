#pragma once

#include "maglens/geometry.hpp"
#include "maglens/lens.hpp"
#include "maglens/phantom.hpp"
#include "maglens/record.hpp"
#include "maglens/volume.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace maglens {

// Where a scene's volume came from; serialized instead of the voxels.
struct VolumeSource {
  enum class Kind { None, Phantom, Raw };
  Kind kind = Kind::None;
  std::optional<PhantomSpec> phantom;
  std::string raw_path;
  std::string meta_path;

  static VolumeSource none() { return {}; }
  static VolumeSource from_phantom(PhantomSpec spec);
  static VolumeSource from_raw(std::string raw_path, std::string meta_path);
  bool operator==(const VolumeSource&) const = default;
};

// A loaded volume plus values derived from it once.
struct VolumeAsset {
  std::shared_ptr<const VolumeGrid> grid;
  // Default normalization for the gradient-magnitude effect (95th
  // percentile of |grad f| over the grid).
  double gradient_reference = 1.0;
  VolumeSource source;
};

// Generates or loads the volume. Phantoms are cached per spec for the life
// of the process.
std::shared_ptr<const VolumeAsset> load_volume(const VolumeSource& source);
std::shared_ptr<const VolumeAsset> make_volume_asset(std::shared_ptr<const VolumeGrid> grid,
                                                     VolumeSource source);

struct MenuModel {
  std::size_t page = 0;
  Pose anchor;              // follows the non-dominant hand
  double opened_at_ms = 0;  // start of the spawn animation
  bool operator==(const MenuModel&) const = default;
};

struct ProxyBinding {
  LensId proxy;
  LensId remote;
  double gain = 1.0;  // translation gain, remote distance / proxy distance
  Pose spawn_pose;
  bool operator==(const ProxyBinding&) const = default;
};

struct LensAppearance {
  LensId lens;
  double start_ms;
  bool operator==(const LensAppearance&) const = default;
};

using Rgb = std::array<std::uint8_t, 3>;
inline constexpr Rgb kDefaultBackground{18, 18, 24};

// Everything the renderer and the session layer need to know. Mutated only by
// the interaction reducer.
struct SceneState {
  std::shared_ptr<const VolumeAsset> volume;
  std::vector<Lens> lenses;  // sorted by id
  Pose head;
  MenuModel menu;
  std::optional<ProxyBinding> proxy;
  std::optional<LensId> held;
  double clock_ms = 0;
  std::vector<LensAppearance> appearances;
  Rgb background = kDefaultBackground;

  const Lens* find(LensId id) const;
  Lens* find(LensId id);
  LensId next_id() const;
  // Keeps lenses sorted by id. Replaces an existing lens with the same id.
  void insert(Lens lens);
  bool remove(LensId id);

  // Empty when every scene invariant holds.
  std::string check_invariants() const;

  // Structured-text scene format (see docs/scene_format.md).
  std::string serialize() const;
  // Parses and loads the volume. Relative raw paths resolve against base_dir.
  static SceneState parse(std::string_view text, const std::string& base_dir = ".");
  static SceneState load(const std::string& path);

  bool operator==(const SceneState& o) const { return serialize() == o.serialize(); }
};

// Lens record helpers shared with the session format.
Record lens_to_record(const Lens& lens);
Lens lens_from_record(const Record& r);
std::string stack_to_string(std::span<const EffectDescriptor> stack);
std::vector<EffectDescriptor> stack_from_string(std::string_view text);

}  // namespace maglens
