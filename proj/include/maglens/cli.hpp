#pragma once

#include "maglens/render.hpp"
#include "maglens/scene.hpp"

#include <string>
#include <vector>

namespace maglens {

// Camera 2.6 m in front of the default phantom's long face, looking along
// +Y with world +Z up.
Camera overview_camera(int width = 320, int height = 240);

// Default phantom, no lenses, head at the overview camera.
SceneState overview_scene();

// Default phantom plus one MIP lens between camera and volume; the scene the
// bench subcommand times.
SceneState benchmark_scene();

// Exit codes: 0 success, 1 failed assertions, 2 usage or input errors.
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace maglens
