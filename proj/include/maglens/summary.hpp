#pragma once

#include "maglens/interaction.hpp"
#include "maglens/scene.hpp"

#include <json.hpp>

#include <span>

namespace maglens {

// State-bearing message body shared by the server and offline replay: lens
// list, reducer mode and menu state. Holds no transport fields.
nlohmann::json scene_summary(const SceneState& scene, const InteractionMode& mode,
                             const InteractionConfig& config = {});

nlohmann::json feedback_json(const FeedbackEvent& f);
nlohmann::json feedback_json(std::span<const FeedbackEvent> events);

}  // namespace maglens
