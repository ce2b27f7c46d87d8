#include "maglens/cli.hpp"

#include "maglens/image_io.hpp"
#include "maglens/kernels/sampling.hpp"
#include "maglens/phantom.hpp"
#include "maglens/server.hpp"
#include "maglens/session.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <thread>

namespace maglens {

namespace fs = std::filesystem;

Camera overview_camera(int width, int height) {
  Camera c;
  c.pose = Pose(Vec3(0.0, -2.6, 0.0), quat_from_axis_angle(Vec3::UnitX(), std::numbers::pi / 2));
  c.width = width;
  c.height = height;
  return c;
}

SceneState overview_scene() {
  SceneState scene;
  scene.volume = load_volume(VolumeSource::from_phantom(PhantomSpec::default_spec()));
  scene.head = overview_camera().pose;
  return scene;
}

SceneState benchmark_scene() {
  SceneState scene = overview_scene();
  Lens lens;
  lens.id = LensId{1};
  lens.pose = Pose(Vec3(0.0, -1.6, 0.0), scene.head.orientation());
  lens.radius = 0.35;
  lens.front_effect = effect_from_label("mip");
  lens.back_effect = effect_from_label("mip");
  scene.insert(lens);
  return scene;
}

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAssertions = 1;
constexpr int kExitUsage = 2;

std::string basename_of(const std::string& path) { return fs::path(path).filename().string(); }

int cmd_replay(const std::string& script_path, const std::string& out_dir, bool png, bool no_render, int workers) {
  const auto script = SessionScript::load(script_path);
  ReplayOptions opts;
  opts.render_snapshots = !no_render;
  opts.workers = workers;
  const auto result = replay(script, opts);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    for (const auto& s : result.snapshots) {
      if (no_render) continue;
      write_ppm(s.image, (fs::path(out_dir) / (s.name + ".ppm")).string());
      if (png) write_png(s.image, (fs::path(out_dir) / (s.name + ".png")).string());
    }
    write_text_file((fs::path(out_dir) / "report.txt").string(),
                    format_report(script, result, basename_of(script_path)));
    write_text_file((fs::path(out_dir) / "final.scene").string(), result.final_scene.serialize());
  }
  for (const auto& s : result.snapshots) {
    std::cout << "snapshot " << s.name << " sha256=" << (s.sha256.empty() ? "-" : s.sha256) << "\n";
  }
  std::size_t failed = 0;
  for (const auto& a : result.assertions) {
    if (a.passed) continue;
    ++failed;
    std::cout << "FAIL line " << a.line << " t=" << format_number(a.timestamp_ms) << " "
              << query_name(a.query.kind) << (a.query.id ? " id=" + std::to_string(a.query.id->value) : "")
              << " expected=" << a.expected << " actual=" << a.actual << "\n";
  }
  std::cout << "replayed " << result.events << " events, " << result.snapshots.size() << " snapshots, "
            << result.assertions.size() - failed << "/" << result.assertions.size() << " assertions passed\n";
  return failed == 0 ? kExitOk : kExitAssertions;
}

SceneState load_scene_arg(const std::string& path) {
  if (path == "default") return overview_scene();
  if (!fs::exists(path)) throw std::runtime_error("file not found: " + path);
  return SceneState::load(path);
}

int cmd_render(const std::string& scene_path, const std::string& out, const std::string& camera_pose, double fov,
               int width, int height, double step, int workers) {
  const SceneState scene = load_scene_arg(scene_path);
  Camera camera;
  camera.pose = camera_pose.empty() ? scene.head : Pose::parse(camera_pose);
  camera.fov_deg = fov;
  camera.width = width;
  camera.height = height;
  if (auto e = camera.check_invariants(); !e.empty()) throw std::invalid_argument(e);
  RenderSettings settings;
  settings.step = step;
  settings.workers = workers;
  const auto fb = render_frame(scene, camera, TransferFunction::default_tf(), settings);
  write_image(fb, out);
  std::cout << "wrote " << out << " (" << width << "x" << height << ")\n";
  return kExitOk;
}

int cmd_phantom(const std::string& spec_path, const std::string& out, std::string meta_path, const std::string& dtype) {
  PhantomSpec spec = PhantomSpec::default_spec();
  if (spec_path != "default") {
    if (!fs::exists(spec_path)) throw std::runtime_error("file not found: " + spec_path);
    spec = PhantomSpec::parse(read_text_file(spec_path));
  }
  const VolumeGrid grid = generate_phantom(spec);
  VolumeMeta meta;
  meta.dims = grid.dims();
  meta.spacing = grid.spacing();
  meta.origin = grid.origin();
  meta.encoding = dtype == "u8" ? ScalarEncoding::U8 : ScalarEncoding::F32;
  if (meta_path.empty()) meta_path = fs::path(out).replace_extension(".meta").string();
  save_raw(grid, out, meta.encoding);
  write_text_file(meta_path, meta.serialize());
  std::cout << "wrote " << out << " and " << meta_path << "\n";
  return kExitOk;
}

int cmd_serve(unsigned short port, const std::string& scene_path, const std::string& script_path, double fps,
              int workers) {
  ServerOptions opts;
  opts.port = port;
  opts.frames_per_second = fps;
  opts.render_workers = workers;
  opts.handle_signals = true;
  if (const char* addr = std::getenv(kBindAddressEnv); addr && *addr) opts.address = addr;
  if (!script_path.empty()) {
    const auto script = SessionScript::load(script_path);
    opts.scene_text = format_records(script.scene_records);
    opts.base_dir = script.base_dir;
    opts.camera = script.camera;
    opts.tf = script.tf;
    opts.config = script.config;
  } else if (scene_path == "default") {
    opts.scene_text = "volume phantom=default\nhead pose=" + overview_camera().pose.to_string() + "\n";
  } else {
    if (!fs::exists(scene_path)) throw std::runtime_error("file not found: " + scene_path);
    opts.scene_text = read_text_file(scene_path);
    opts.base_dir = fs::path(scene_path).parent_path().string();
    if (opts.base_dir.empty()) opts.base_dir = ".";
  }
  Server server(opts);
  std::thread announce([&] {
    for (int i = 0; i < 600 && !server.listening(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    if (server.listening()) {
      std::cout << "serving ws://" << opts.address << ":" << server.port() << "/session" << std::endl;
    }
  });
  try {
    server.run();
  } catch (...) {
    announce.join();
    throw;
  }
  announce.join();
  return kExitOk;
}

struct BenchStats {
  double mean = 0, median = 0, min = 0, max = 0;
};

BenchStats time_frames(const SceneState& scene, const Camera& camera, int frames, int workers) {
  RenderSettings settings;
  settings.workers = workers;
  std::vector<double> ms;
  for (int i = 0; i < frames; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto fb = render_frame(scene, camera, TransferFunction::default_tf(), settings);
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  BenchStats s;
  for (double v : ms) s.mean += v / static_cast<double>(ms.size());
  s.median = ms.size() % 2 ? ms[ms.size() / 2] : 0.5 * (ms[ms.size() / 2 - 1] + ms[ms.size() / 2]);
  s.min = ms.front();
  s.max = ms.back();
  return s;
}

int cmd_bench(int frames, int width, int height, int workers) {
  const SceneState scene = benchmark_scene();
  const Camera camera = overview_camera(width, height);
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<int> configs = {1};
  const int parallel = workers > 0 ? workers : hw;
  if (parallel != 1) configs.push_back(parallel);
  std::cout << "bench scene=default-phantom+mip-lens resolution=" << width << "x" << height
            << " kernels=" << kernels::isa_name(kernels::active_isa()) << " hardware_threads=" << hw << "\n";
  for (int w : configs) {
    const auto s = time_frames(scene, camera, frames, w);
    std::cout << "workers=" << w << " frames=" << frames << " mean_ms=" << format_number(std::round(s.mean * 10) / 10)
              << " median_ms=" << format_number(std::round(s.median * 10) / 10)
              << " min_ms=" << format_number(std::round(s.min * 10) / 10)
              << " max_ms=" << format_number(std::round(s.max * 10) / 10) << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"maglens: magic-lens volume exploration engine"};
  app.require_subcommand(1);

  std::string script_path, out_dir;
  bool png = false, no_render = false;
  int workers = 0;
  auto* replay_cmd = app.add_subcommand("replay", "Replay a session script, write snapshots and a report");
  replay_cmd->add_option("script", script_path, "Session script")->required();
  replay_cmd->add_option("--out", out_dir, "Output directory for snapshots and report.txt");
  replay_cmd->add_flag("--png", png, "Also write PNG snapshots");
  replay_cmd->add_flag("--no-render", no_render, "Skip snapshot rendering");
  replay_cmd->add_option("--workers", workers, "Render threads (0 = all cores)");

  std::string scene_path, image_out, camera_pose;
  double fov = 60.0, step = 0.0;
  int width = 320, height = 240;
  auto* render_cmd = app.add_subcommand("render", "Render one frame of a scene file");
  render_cmd->add_option("scene", scene_path, "Scene file, or 'default'")->required();
  render_cmd->add_option("--out", image_out, "Output image (.ppm or .png)")->required();
  render_cmd->add_option("--camera", camera_pose, "Camera pose x,y,z,qw,qx,qy,qz (default: scene head)");
  render_cmd->add_option("--fov", fov, "Vertical field of view in degrees");
  render_cmd->add_option("--width", width, "Image width")->check(CLI::Range(1, 8192));
  render_cmd->add_option("--height", height, "Image height")->check(CLI::Range(1, 8192));
  render_cmd->add_option("--step", step, "Sampling step in meters (default half the voxel spacing)");
  render_cmd->add_option("--workers", workers, "Render threads (0 = all cores)");

  std::string spec_path, raw_out, meta_out, dtype = "f32";
  auto* phantom_cmd = app.add_subcommand("phantom", "Generate the synthetic phantom as RAW + metadata");
  phantom_cmd->add_option("spec", spec_path, "Phantom spec file, or 'default'")->required();
  phantom_cmd->add_option("--out", raw_out, "RAW output path")->required();
  phantom_cmd->add_option("--meta", meta_out, "Metadata path (default: RAW path with .meta)");
  phantom_cmd->add_option("--dtype", dtype, "Element type")->check(CLI::IsMember({"u8", "f32"}));

  int port = 8080;
  double fps = 10.0;
  std::string serve_scene = "default", serve_script;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the /session websocket endpoint");
  serve_cmd->add_option("--port", port, "TCP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--scene", serve_scene, "Initial scene file, or 'default'");
  serve_cmd->add_option("--script", serve_script, "Take scene, camera and config from a session script header");
  serve_cmd->add_option("--fps", fps, "Frame cadence")->check(CLI::Range(0.1, 120.0));
  serve_cmd->add_option("--workers", workers, "Render threads (0 = all cores)");

  int frames = 5;
  auto* bench_cmd = app.add_subcommand("bench", "Time frames of the default phantom with one MIP lens");
  bench_cmd->add_option("--frames", frames, "Frames per configuration")->check(CLI::Range(1, 10000));
  bench_cmd->add_option("--width", width, "Image width")->check(CLI::Range(1, 8192));
  bench_cmd->add_option("--height", height, "Image height")->check(CLI::Range(1, 8192));
  bench_cmd->add_option("--workers", workers, "Parallel configuration thread count (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*replay_cmd) return cmd_replay(script_path, out_dir, png, no_render, workers);
    if (*render_cmd) return cmd_render(scene_path, image_out, camera_pose, fov, width, height, step, workers);
    if (*phantom_cmd) return cmd_phantom(spec_path, raw_out, meta_out, dtype);
    if (*serve_cmd) return cmd_serve(static_cast<unsigned short>(port), serve_scene, serve_script, fps, workers);
    if (*bench_cmd) return cmd_bench(frames, width, height, workers);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  std::cerr << app.help();
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> copy = args;
  std::vector<char*> argv;
  static char program[] = "maglens";
  argv.push_back(program);
  for (auto& a : copy) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace maglens
