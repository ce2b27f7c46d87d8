#include "maglens/interaction.hpp"

#include <cmath>
#include <numbers>

namespace maglens {

Pose menu_anchor_for(const Pose& non_dominant_hand, const InteractionConfig& config) {
  return Pose(non_dominant_hand.transform_point(Vec3(0.0, 0.0, config.menu_offset)),
              non_dominant_hand.orientation());
}

std::size_t menu_page_count(const InteractionConfig& config) {
  const std::size_t n = effect_registry().size();
  return std::max<std::size_t>(1, (n + config.sections_per_page - 1) / config.sections_per_page);
}

std::optional<int> menu_section_at(const MenuModel& menu, const Vec3& world,
                                   const InteractionConfig& config) {
  const Vec3 local = menu.anchor.inverse_transform_point(world);
  if (!(std::abs(local.z()) <= config.menu_plane_tolerance)) return std::nullopt;
  const double r = std::hypot(local.x(), local.y());
  if (r < config.menu_inner_radius) return -1;
  if (r > config.menu_outer_radius) return std::nullopt;
  double angle = std::atan2(local.y(), local.x()) * 180.0 / std::numbers::pi;
  if (angle < 0.0) angle += 360.0;
  const double width = 360.0 / static_cast<double>(config.sections_per_page);
  const int last = static_cast<int>(config.sections_per_page) - 1;
  return std::min(last, static_cast<int>(std::floor(angle / width)));
}

bool inside_menu_disc(const MenuModel& menu, const Vec3& world, const InteractionConfig& config) {
  const Vec3 local = menu.anchor.inverse_transform_point(world);
  return std::abs(local.z()) <= config.menu_plane_tolerance &&
         std::hypot(local.x(), local.y()) <= config.menu_outer_radius;
}

std::pair<MenuModel, std::optional<MenuCommand>> menu_step(const MenuModel& menu, const InputEvent& event,
                                                           bool dominant_trigger_pressed,
                                                           std::optional<Vec3> held_release_point,
                                                           const InteractionConfig& config) {
  MenuModel next = menu;
  next.anchor = menu_anchor_for(event.non_dominant.pose, config);
  if (held_release_point && inside_menu_disc(next, *held_release_point, config)) {
    return {next, MenuCommand{MenuCommandKind::RemoveHeldLens, 0}};
  }
  if (!dominant_trigger_pressed) return {next, std::nullopt};
  const auto section = menu_section_at(next, event.dominant.pose.position(), config);
  if (!section) return {next, std::nullopt};
  if (*section < 0) {
    next.page = (next.page + 1) % menu_page_count(config);
    return {next, MenuCommand{MenuCommandKind::NextPage, 0}};
  }
  const std::size_t index = next.page * config.sections_per_page + static_cast<std::size_t>(*section);
  if (index >= effect_registry().size()) return {next, std::nullopt};
  return {next, MenuCommand{MenuCommandKind::CreateLens, index}};
}

}  // namespace maglens
