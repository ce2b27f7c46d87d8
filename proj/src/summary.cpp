#include "maglens/summary.hpp"

namespace maglens {

namespace {

nlohmann::json pose_json(const Pose& p) { return p.to_array(); }

std::vector<std::string> stack_labels(const Lens& lens) {
  std::vector<std::string> out;
  for (const auto& d : lens.stack) out.push_back(effect_label(d));
  return out;
}

}  // namespace

nlohmann::json scene_summary(const SceneState& scene, const InteractionMode& mode,
                             const InteractionConfig& config) {
  nlohmann::json lenses = nlohmann::json::array();
  for (const auto& lens : scene.lenses) {
    lenses.push_back({
        {"id", lens.id.value},
        {"pose", pose_json(lens.pose)},
        {"radius", lens.radius},
        {"front", effect_label(lens.front_effect)},
        {"back", effect_label(lens.back_effect)},
        {"stack", stack_labels(lens)},
        {"combined", lens.combined()},
        {"held", scene.held == lens.id},
        {"proxy", scene.proxy && scene.proxy->proxy == lens.id},
    });
  }

  nlohmann::json sections = nlohmann::json::array();
  const auto& reg = effect_registry();
  for (std::size_t i = 0; i < config.sections_per_page; ++i) {
    const std::size_t k = scene.menu.page * config.sections_per_page + i;
    sections.push_back(k < reg.size() ? nlohmann::json(reg[k].name) : nlohmann::json(nullptr));
  }

  nlohmann::json proxy = nullptr;
  if (scene.proxy) {
    proxy = {{"proxy", scene.proxy->proxy.value},
             {"remote", scene.proxy->remote.value},
             {"gain", scene.proxy->gain}};
  }

  return {
      {"type", "SceneSummary"},
      {"clock_ms", scene.clock_ms},
      {"lenses", std::move(lenses)},
      {"mode", mode.name()},
      {"menu",
       {{"visible", mode.menu_visible},
        {"page", scene.menu.page},
        {"page_count", menu_page_count(config)},
        {"anchor", pose_json(scene.menu.anchor)},
        {"sections", std::move(sections)}}},
      {"proxy", std::move(proxy)},
  };
}

nlohmann::json feedback_json(const FeedbackEvent& f) {
  nlohmann::json j = {{"kind", feedback_kind_name(f.kind)}, {"code", f.code}};
  j["hand"] = f.hand ? nlohmann::json(hand_name(*f.hand)) : nlohmann::json(nullptr);
  j["lens"] = f.lens ? nlohmann::json(f.lens->value) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json feedback_json(std::span<const FeedbackEvent> events) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& f : events) out.push_back(feedback_json(f));
  return out;
}

}  // namespace maglens
