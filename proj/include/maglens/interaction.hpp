#pragma once

#include "maglens/effects.hpp"
#include "maglens/geometry.hpp"
#include "maglens/lens.hpp"
#include "maglens/scene.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace maglens {

enum class Hand { Dominant, NonDominant };
enum class ButtonEdge { None, Pressed, Released };

std::string_view hand_name(Hand h);

struct HandState {
  Pose pose;
  bool grab_active = false;
  bool trigger_active = false;
  ButtonEdge menu_button_edge = ButtonEdge::None;
  bool operator==(const HandState&) const = default;
};

struct InputEvent {
  double timestamp_ms = 0;
  Pose head;
  HandState dominant;
  HandState non_dominant;

  const HandState& hand(Hand h) const { return h == Hand::Dominant ? dominant : non_dominant; }
  bool operator==(const InputEvent&) const = default;
};

// Tolerances and sizes the paper leaves open, in meters unless noted.
struct InteractionConfig {
  double grab_distance = 0.08;
  double ring_proximity = 0.15;
  double widget_radius = 0.03;
  double menu_offset = 0.15;
  double menu_inner_radius = 0.03;
  double menu_outer_radius = 0.12;
  double menu_plane_tolerance = 0.05;
  std::size_t sections_per_page = 6;
  double proxy_distance = 0.5;
  double proxy_radius = 0.15;
  double raycast_range = 100.0;
  double min_resize_distance = 0.01;
  double new_lens_radius = 0.15;
  double param_step = 0.25;
  SnapThresholds snap;
  bool operator==(const InteractionConfig&) const = default;
};

struct Idle {
  bool operator==(const Idle&) const = default;
};
struct Grabbing {
  LensId lens;
  Hand hand;
  Pose offset;     // lens pose in the hand frame, fixed for the whole grab
  Pose last_hand;  // hand pose the lens was last placed from
  bool operator==(const Grabbing&) const = default;
};
struct TwoHandResize {
  LensId lens;
  double d0;
  double r0;
  std::optional<double> remote_r0;  // set when resizing a proxy
  bool operator==(const TwoHandResize&) const = default;
};
struct MenuOpen {
  std::size_t page;
  bool operator==(const MenuOpen&) const = default;
};
struct ProxyActive {
  ProxyBinding binding;
  bool operator==(const ProxyActive&) const = default;
};

// Reducer state that is not part of the scene. Idle, MenuOpen and
// ProxyActive are the resting states; which one applies is derived from the
// scene after every step.
struct InteractionMode {
  std::variant<Idle, Grabbing, TwoHandResize, MenuOpen, ProxyActive> state;
  bool menu_visible = false;
  // Previous button levels, for edge detection.
  bool dominant_grab = false;
  bool non_dominant_grab = false;
  bool dominant_trigger = false;
  bool non_dominant_trigger = false;
  std::optional<double> last_timestamp_ms;

  std::string name() const;
  bool operator==(const InteractionMode&) const = default;
};

enum class FeedbackKind { Haptic, Audio, Visual };
std::string_view feedback_kind_name(FeedbackKind k);

struct FeedbackEvent {
  FeedbackKind kind;
  std::optional<Hand> hand;
  std::optional<LensId> lens;
  std::string code;  // grab, release, snap, reject, menu-pick, ...
  bool operator==(const FeedbackEvent&) const = default;
};

struct StepResult {
  SceneState scene;
  InteractionMode mode;
  std::vector<FeedbackEvent> feedback;
  bool structural = false;  // a lens was created, removed, combined or split
};

// The reducer. Pure: identical inputs give identical outputs. Invalid events
// (non-increasing timestamp, non-finite poses) leave scene and mode unchanged
// and emit a reject.
StepResult step(SceneState scene, InteractionMode mode, const InputEvent& event,
                const InteractionConfig& config = {});

// ---------------------------------------------------------------------------
// Sub-gestures, exposed for testing.

// Distance from p to the closest point of the lens disc (ring included).
double point_disc_distance(const Lens& lens, const Vec3& p);
std::optional<LensId> grab_test(const SceneState& scene, const Pose& hand,
                                const InteractionConfig& config = {});
Lens grabbed_update(const Lens& lens, const Pose& offset, const Pose& hand);
// Throws InvalidOperation when d0 <= min_resize_distance.
double resize_update(double d0, double r0, double d, const InteractionConfig& config = {});

enum class MenuCommandKind { CreateLens, RemoveHeldLens, NextPage };
struct MenuCommand {
  MenuCommandKind kind;
  std::size_t template_index = 0;
  bool operator==(const MenuCommand&) const = default;
};

Pose menu_anchor_for(const Pose& non_dominant_hand, const InteractionConfig& config = {});
std::size_t menu_page_count(const InteractionConfig& config = {});
// Section under a point in menu-local polar coordinates: -1 for the hub,
// 0..sections-1 for a section, nullopt outside.
std::optional<int> menu_section_at(const MenuModel& menu, const Vec3& world,
                                   const InteractionConfig& config = {});
bool inside_menu_disc(const MenuModel& menu, const Vec3& world, const InteractionConfig& config = {});
// Updates the anchor from the event; on a dominant trigger press reports the
// picked command. held_release_point is the held lens center when the held
// lens is released on this event.
std::pair<MenuModel, std::optional<MenuCommand>> menu_step(
    const MenuModel& menu, const InputEvent& event, bool dominant_trigger_pressed,
    std::optional<Vec3> held_release_point, const InteractionConfig& config = {});

enum class RingCommandKind { CycleFrontEffect, CycleBackEffect, AdjustParam, Split };
struct RingCommand {
  RingCommandKind kind;
  std::string param;  // AdjustParam only
  double delta = 0;   // AdjustParam only
  bool operator==(const RingCommand&) const = default;
};

// Widget position at angle_deg on the lens ring.
Vec3 ring_widget_position(const Lens& lens, double angle_deg);
double point_ring_distance(const Lens& lens, const Vec3& p);
std::optional<RingCommand> ring_control_step(const Lens& lens, const Pose& hand, bool trigger_pressed,
                                             const InteractionConfig& config = {});
// Applies a ring command to a lens; Split is not handled here.
Lens apply_ring_command(const Lens& lens, const RingCommand& cmd);

std::optional<LensId> snap_partner(const SceneState& scene, LensId held,
                                   const InteractionConfig& config = {});
std::optional<LensId> raycast_select(const SceneState& scene, const Pose& controller,
                                     const InteractionConfig& config = {});

// Throws InvalidOperation when the remote is missing or a proxy exists.
std::pair<SceneState, ProxyBinding> spawn_proxy(SceneState scene, LensId remote, const Pose& head,
                                                const InteractionConfig& config = {});
SceneState dismiss_proxy(SceneState scene);
// Moves the remote lens by the proxy's pose change from `before` to `after`.
SceneState proxy_apply(const ProxyBinding& binding, const Pose& before, const Pose& after,
                       SceneState scene);

}  // namespace maglens
