#include "maglens/cli.hpp"
#include "maglens/interaction.hpp"
#include "maglens/kernels/sampling.hpp"
#include "maglens/server.hpp"
#include "maglens/session.hpp"
#include "maglens/summary.hpp"

#include "test_support.hpp"
#include "ws_client.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

using namespace maglens;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

// Collects sub-check failures for one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && first_.empty()) first_ = what;
    ok_ = ok_ && ok;
  }
  bool ok() const { return ok_; }
  const std::string& first_failure() const { return first_; }

 private:
  bool ok_ = true;
  std::string first_;
};

std::string session_path(const std::string& name) {
  return testing::source_dir() + "/sessions/" + name;
}

// --- wreck reveal ------------------------------------------------------------

Outcome wreck_reveal() {
  const auto t0 = Clock::now();
  const auto script = SessionScript::load(session_path("wreck_reveal.session"));
  ReplayOptions quick;
  quick.render_snapshots = false;
  const auto result = replay(script, quick);
  if (!result.all_passed()) return {false, "session assertions failed"};

  const SceneState& lensed = result.final_scene;
  Camera camera = script.camera;
  camera.pose = lensed.head;
  SceneState plain;
  plain.volume = lensed.volume;
  plain.head = lensed.head;

  const auto& spec = lensed.volume->source.phantom;
  if (!spec || !(*spec == PhantomSpec::default_spec())) return {false, "session does not use the default phantom"};
  if (lensed.lenses.size() != 1 || !lensed.lenses[0].combined()) return {false, "no combined lens in the final scene"};
  const Lens& lens = lensed.lenses[0];

  RenderSettings no_rings;
  no_rings.draw_rings = false;
  const auto f_plain = render_frame(plain, camera, script.tf, no_rings);
  const auto f_lens = render_frame(lensed, camera, script.tf, no_rings);

  const int w = camera.width, h = camera.height;
  const auto mask = testing::wreck_projection_mask(*spec, camera);
  const auto near = testing::dilate(mask, w, h, 3);
  const auto band = testing::dilate(mask, w, h, 8);
  double plain_wreck = 0, plain_around = 0, lens_wreck = 0, lens_around = 0;
  int n_wreck = 0, n_around = 0, n_lens_wreck = 0, n_lens_around = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const bool wreck = mask[i];
      const bool around = band[i] && !near[i];
      if (!wreck && !around) continue;
      const double lp = luminance(f_plain.pixel(x, y));
      const double ll = luminance(f_lens.pixel(x, y));
      (wreck ? plain_wreck : plain_around) += lp;
      (wreck ? n_wreck : n_around) += 1;
      // Lens interior: the ray crosses the disc inside the ring.
      const Ray ray = camera.pixel_ray(x, y);
      const auto hit = ray_disc_hit(lens, ray);
      if (!hit || (ray.at(hit->t) - lens.center()).norm() > lens.radius - lens.ring_width) continue;
      (wreck ? lens_wreck : lens_around) += ll;
      (wreck ? n_lens_wreck : n_lens_around) += 1;
    }
  }
  if (n_wreck < 100 || n_around < 100 || n_lens_wreck < 100 || n_lens_around < 100) {
    return {false, "too few wreck or surrounding pixels"};
  }
  plain_wreck /= n_wreck;
  plain_around /= n_around;
  lens_wreck /= n_lens_wreck;
  lens_around /= n_lens_around;
  const double contrast = std::abs(plain_wreck - plain_around) / plain_around;
  const double ratio = lens_around > 0 ? lens_wreck / lens_around : std::numeric_limits<double>::infinity();
  const double elapsed = seconds_since(t0);

  std::ostringstream d;
  d << "plain wreck " << plain_wreck << " vs surround " << plain_around << " (" << contrast * 100
    << "% <= 3%); lens wreck " << lens_wreck << " vs interior " << lens_around << " (ratio " << ratio
    << " >= 1.5); " << n_wreck << " wreck px; " << elapsed << " s <= 60 s";
  return {contrast <= 0.03 && ratio >= 1.5 && elapsed <= 60.0, d.str()};
}

// --- geometry ----------------------------------------------------------------

Outcome geometry_oracles() {
  const auto t0 = Clock::now();
  Checks c;
  std::mt19937_64 rng(31337);
  int hits = 0;
  double worst_t = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Lens l = testing::random_lens(rng, 1, 1.0);
    const Vec3 o = testing::random_pose(rng, 3.0).position();
    Vec3 in_plane = testing::random_unit(rng);
    in_plane.z() = 0;
    const Vec3 target = l.pose.transform_point(in_plane * l.radius * 1.2);
    const Vec3 dir = (i % 2 ? (target - o) : testing::random_unit(rng)).normalized();
    const auto got = ray_disc_hit(l, Ray(o, dir));
    const auto want = testing::oracle_disc_hit(l, o, dir);
    c.expect(got.has_value() == want.has_value(), "hit/miss disagreement");
    if (got && want) {
      ++hits;
      worst_t = std::max(worst_t, std::abs(got->t - want->t));
      c.expect((got->face == Face::Front) == want->front, "face disagreement");
    }
  }
  c.expect(worst_t <= 1e-9, "t off by more than 1e-9");

  const InteractionConfig cfg;
  int selected = 0;
  for (int i = 0; i < 1000; ++i) {
    SceneState s;
    const auto n = 1 + rng() % 8;
    for (std::uint32_t id = 1; id <= n; ++id) s.insert(testing::random_lens(rng, id, 1.5));
    Pose controller = testing::random_pose(rng, 1.0);
    if (i % 2) {
      // Point the controller at a random lens so selections are common.
      const Lens& aim = s.lenses[rng() % s.lenses.size()];
      const Vec3 dir = (aim.center() - controller.position()).normalized();
      controller.set_orientation(Quat::FromTwoVectors(-Vec3::UnitZ(), dir));
    }
    const auto got = raycast_select(s, controller, cfg);
    c.expect(got == testing::oracle_raycast(s.lenses, controller, cfg.raycast_range), "raycast disagreement");
    selected += got.has_value();
  }
  const double elapsed = seconds_since(t0);
  c.expect(elapsed <= 10.0, "over 10 s");
  std::ostringstream d;
  d << "10000 disc cases (" << hits << " hits, max |dt| " << worst_t << "), 1000 raycast scenes (" << selected
    << " selections); " << elapsed << " s";
  if (!c.ok()) d << "; first failure: " << c.first_failure();
  return {c.ok(), d.str()};
}

// --- rendering ---------------------------------------------------------------

std::shared_ptr<const VolumeGrid> smooth_grid(int n) {
  const double h = 1.0 / (n - 1);
  return std::make_shared<const VolumeGrid>(testing::make_grid(
      {n, n, n}, Vec3::Constant(h), Vec3::Constant(-0.5), [](const Vec3& p) {
        return 0.5 + 0.4 * std::sin(2.1 * p.x() + 0.3) * std::cos(1.7 * p.y() - 0.2) * std::cos(2.3 * p.z());
      }));
}

SceneState scene_with(std::shared_ptr<const VolumeGrid> grid) {
  SceneState s;
  s.volume = make_volume_asset(std::move(grid), VolumeSource::none());
  return s;
}

Camera camera_at(Vec3 at, int w, int h, double fov) {
  Camera c;
  c.pose = Pose(at, Quat::Identity());
  c.width = w;
  c.height = h;
  c.fov_deg = fov;
  return c;
}

Outcome rendering_oracles() {
  Checks c;
  // MIP through a lens against a 10x finer step.
  const auto grid = smooth_grid(32);
  SceneState s = scene_with(grid);
  Lens lens;
  lens.id = LensId{1};
  lens.pose = Pose(Vec3(0, 0, 0.8), Quat::Identity());
  lens.radius = 1.5;
  lens.front_effect = lens.back_effect = effect_from_label("mip");
  s.insert(lens);
  const Camera cam = camera_at(Vec3(0, 0, 1.5), 32, 32, 40);
  const double step = 0.5 * grid->min_spacing();
  double mip_worst = 0.0;
  int mip_pixels = 0;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Ray ray = cam.pixel_ray(x, y);
      const auto acc = integrate_ray(s, TransferFunction::default_tf(), ray, {});
      double t0, t1;
      if (!acc || !intersect_box(ray, grid->box_min(), grid->box_max(), t0, t1)) continue;
      double oracle = 0.0;
      for (double t = std::max(t0, 0.0); t < t1; t += step / 10) {
        oracle = std::max(oracle, testing::oracle_sample(*grid, ray.at(t)));
      }
      mip_worst = std::max(mip_worst, std::abs(acc->color - oracle));
      ++mip_pixels;
    }
  }
  c.expect(mip_pixels > 500 && mip_worst <= 1e-3, "MIP deviation");

  // Gradient magnitude against the analytic sin*cos gradient at 64^3.
  const int n = 64;
  const double h = 1.0 / (n - 1);
  const double two_pi = 2 * std::numbers::pi;
  const auto sc = testing::make_grid({n, n, n}, Vec3::Constant(h), Vec3::Zero(), [&](const Vec3& p) {
    return 0.5 + 0.5 * std::sin(two_pi * p.x()) * std::cos(two_pi * p.y());
  });
  std::mt19937_64 rng(64);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  double grad_worst = 0.0;
  for (int checked = 0; checked < 5000;) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const Vec3 exact(0.5 * two_pi * std::cos(two_pi * p.x()) * std::cos(two_pi * p.y()),
                     -0.5 * two_pi * std::sin(two_pi * p.x()) * std::sin(two_pi * p.y()), 0.0);
    if (exact.norm() < 0.05 * 0.5 * two_pi) continue;  // relative error is meaningless near zero
    grad_worst = std::max(grad_worst, std::abs(gradient_central(sc, p).norm() - exact.norm()) / exact.norm());
    ++checked;
  }
  c.expect(grad_worst <= 0.05, "gradient error");

  // Opacity never decreases along any ray of a 64x64 DVR frame.
  const SceneState dvr = scene_with(smooth_grid(48));
  const Camera wide = camera_at(Vec3(0, 0, 1.5), 64, 64, 45);
  std::size_t samples = 0, decreases = 0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      std::vector<double> trace;
      integrate_ray(dvr, TransferFunction::default_tf(), wide.pixel_ray(x, y), {}, &trace);
      samples += trace.size();
      for (std::size_t i = 1; i < trace.size(); ++i) decreases += trace[i] < trace[i - 1];
      for (double a : trace) decreases += !(a >= 0.0 && a <= 1.0);
    }
  }
  c.expect(samples > 64 * 64 && decreases == 0, "opacity decreased");

  std::ostringstream d;
  d << "MIP max deviation " << mip_worst << " over " << mip_pixels << " px (<= 1e-3); gradient max relative error "
    << grad_worst * 100 << "% (<= 5%); " << samples << " opacity samples, " << decreases << " decreases";
  if (!c.ok()) d << "; first failure: " << c.first_failure();
  return {c.ok(), d.str()};
}

// --- reducer -----------------------------------------------------------------

struct Stepper {
  SceneState scene;
  InteractionMode mode;
  InputEvent ev = testing::quiet_event(0);
  InteractionConfig cfg;
  StepResult last;

  void go() {
    ev.timestamp_ms += 10;
    last = step(scene, mode, ev, cfg);
    scene = last.scene;
    mode = last.mode;
    ev.dominant.menu_button_edge = ButtonEdge::None;
    ev.non_dominant.menu_button_edge = ButtonEdge::None;
  }
};

Lens plain_lens(std::uint32_t id, const Pose& pose, double r, const std::string& effect) {
  Lens l;
  l.id = LensId{id};
  l.pose = pose;
  l.radius = r;
  l.front_effect = l.back_effect = effect_from_label(effect);
  return l;
}

// Resize through the reducer for random radii and hand separations.
std::size_t resize_mismatches(std::mt19937_64& rng, std::size_t trials) {
  std::uniform_real_distribution<double> radius(0.06, 1.0), sep(0.02, 0.6), scale(0.0, 6.0);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    Stepper s;
    const double r0 = radius(rng);
    const Vec3 c = testing::random_unit(rng);
    s.scene.insert(plain_lens(1, Pose(c, Quat::Identity()), r0, "mip"));
    const double d0 = std::min(sep(rng), 2 * r0);
    s.ev.dominant.pose = Pose(c + Vec3(d0 / 2, 0, 0), Quat::Identity());
    s.ev.dominant.grab_active = true;
    s.go();
    s.ev.non_dominant.pose = Pose(c - Vec3(d0 / 2, 0, 0), Quat::Identity());
    s.ev.non_dominant.grab_active = true;
    s.go();
    if (s.mode.name() != "TwoHandResize") {
      ++bad;
      continue;
    }
    const auto& rs = std::get<TwoHandResize>(s.mode.state);
    for (int k = 0; k < 5; ++k) {
      const Vec3 a = c + testing::random_unit(rng) * scale(rng) * d0 / 2;
      const Vec3 b = c + testing::random_unit(rng) * scale(rng) * d0 / 2;
      s.ev.dominant.pose.set_position(a);
      s.ev.non_dominant.pose.set_position(b);
      s.go();
      const double d = (a - b).norm();
      const double want = std::clamp(rs.r0 * d / rs.d0, kMinLensRadius, kMaxLensRadius);
      const Lens* l = s.scene.find(LensId{1});
      if (!l || rs.r0 != r0 || l->radius != want) ++bad;
    }
  }
  return bad;
}

// Held lens dragged across the distance boundary through the reducer: the
// combine happens exactly when the center distance is within the threshold.
std::size_t snap_boundary_mismatches(std::size_t& snapped) {
  std::size_t bad = 0;
  for (double fraction : {0.05, 0.1, 0.2}) {
    const double r = 0.3;
    for (int i = 0; i <= 400; ++i) {
      Stepper s;
      s.cfg.snap.center_fraction = fraction;
      s.scene.insert(plain_lens(1, Pose(Vec3(0, 0, -1), Quat::Identity()), r, "derivative"));
      s.scene.insert(plain_lens(2, Pose(Vec3(0.5, 0, -1), Quat::Identity()), r, "mip"));
      s.ev.dominant.pose = Pose(Vec3(0.5, 0, -1), Quat::Identity());
      s.ev.dominant.grab_active = true;
      s.go();
      const double x = 2.0 * fraction * r * i / 400.0;
      s.ev.dominant.pose = Pose(Vec3(x, 0, -1), Quat::Identity());
      s.go();
      const Lens* held = s.scene.find(LensId{2});
      if (!held) {
        ++bad;
        continue;
      }
      const double d = (held->center() - Vec3(0, 0, -1)).norm();
      const bool expect = d <= fraction * r;
      const bool got = s.scene.lenses.size() == 1;
      snapped += got;
      if (got != expect) ++bad;
    }
  }
  return bad;
}

// All combine sequences of up to four combines over five registry lenses,
// unwound by splitting; effect multisets must come back.
std::size_t combine_split_mismatches(std::size_t& sequences) {
  const Vec3 eye(0, 0, 5);
  const auto& reg = effect_registry();
  std::size_t bad = 0;
  std::function<void(std::vector<Lens>, int, const std::multiset<std::string>&)> explore =
      [&](std::vector<Lens> lenses, int left, const std::multiset<std::string>& original) {
        // Unwind this state.
        std::vector<Lens> work = lenses;
        std::uint32_t next = 100;
        for (bool any = true; any;) {
          any = false;
          for (std::size_t i = 0; i < work.size(); ++i) {
            if (!work[i].combined()) continue;
            auto [f, s] = split(work[i], LensId{next++});
            if (!f.check_invariants().empty() || !s.check_invariants().empty()) ++bad;
            work[i] = f;
            work.push_back(s);
            any = true;
            break;
          }
        }
        std::multiset<std::string> after;
        for (const auto& l : work) after.insert(l.front_effect.to_token());
        ++sequences;
        if (after != original) ++bad;
        if (left == 0) return;
        for (std::size_t i = 0; i < lenses.size(); ++i) {
          for (std::size_t j = 0; j < lenses.size(); ++j) {
            if (i == j) continue;
            auto c = combine(lenses[i], lenses[j], eye);
            if (!c || !c->check_invariants().empty()) {
              ++bad;
              continue;
            }
            std::vector<Lens> next_set;
            for (std::size_t k = 0; k < lenses.size(); ++k) {
              if (k != i && k != j) next_set.push_back(lenses[k]);
            }
            next_set.push_back(*c);
            explore(next_set, left - 1, original);
          }
        }
      };
  std::vector<Lens> start;
  std::multiset<std::string> original;
  for (std::uint32_t i = 0; i < 5; ++i) {
    start.push_back(plain_lens(i + 1, Pose(Vec3::Zero(), Quat::Identity()), 0.3, reg[i % reg.size()].name));
    original.insert(start.back().front_effect.to_token());
  }
  explore(start, 4, original);
  return bad;
}

// Proxy manipulation through the reducer: the remote turns by the proxy's
// rotation and moves by gain times its translation.
std::size_t proxy_mismatches(std::mt19937_64& rng, std::size_t trials, double& worst_t, double& worst_q,
                              std::string& why) {
  std::uniform_real_distribution<double> dist(0.8, 6.0), small(-0.1, 0.1);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    Stepper s;
    const double range = dist(rng);
    // Tilted at most 1 rad so the controller's ray along -Z meets the disc.
    const Quat tilt = quat_from_axis_angle(testing::random_unit(rng), std::uniform_real_distribution<double>(0, 1)(rng));
    const Pose remote_pose(Vec3(small(rng), small(rng), -range), tilt);
    s.scene.insert(plain_lens(1, remote_pose, 0.4, "mip"));
    s.ev.dominant.pose = Pose(Vec3::Zero(), Quat::Identity());
    s.ev.dominant.trigger_active = true;
    s.go();
    s.ev.dominant.trigger_active = false;
    if (!s.scene.proxy) {
      if (why.empty()) why = "no proxy spawned";
      ++bad;
      continue;
    }
    const ProxyBinding b = *s.scene.proxy;
    const double want_gain = (remote_pose.position() - s.scene.head.position()).norm() / s.cfg.proxy_distance;
    if (std::abs(b.gain - want_gain) > 1e-12 * want_gain) {
      if (why.empty()) why = "gain";
      ++bad;
    }

    const Pose proxy0 = s.scene.find(b.proxy)->pose;
    s.ev.dominant.pose = Pose(proxy0.position(), testing::random_quat(rng));
    s.ev.dominant.grab_active = true;
    s.go();
    if (s.scene.held != b.proxy) {
      if (why.empty()) why = "proxy not grabbed";
      ++bad;
      continue;
    }
    double travelled = 0.0;
    for (int k = 0; k < 5; ++k) {
      const Lens before_remote = *s.scene.find(b.remote);
      const Lens before_proxy = *s.scene.find(b.proxy);
      s.ev.dominant.pose = Pose(s.ev.dominant.pose.position() + Vec3(small(rng), small(rng), small(rng)),
                                quat_from_axis_angle(testing::random_unit(rng), small(rng)) *
                                    s.ev.dominant.pose.orientation());
      s.go();
      const Lens* r = s.scene.find(b.remote);
      const Lens* p = s.scene.find(b.proxy);
      if (!r || !p) {
        ++bad;
        break;
      }
      const Vec3 moved = p->center() - before_proxy.center();
      travelled += moved.norm();
      worst_t = std::max(worst_t, (r->center() - (before_remote.center() + b.gain * moved)).norm());
      const Quat turn_p = p->pose.orientation() * before_proxy.pose.orientation().conjugate();
      const Quat turn_r = r->pose.orientation() * before_remote.pose.orientation().conjugate();
      worst_q = std::max(worst_q, turn_p.angularDistance(turn_r));
    }
    if (!(travelled > 0.0)) {
      if (why.empty()) why = "proxy did not move";
      ++bad;
    }
  }
  if (worst_t > 1e-9 || worst_q > 1e-9) ++bad;
  return bad;
}

Outcome reducer_suite() {
  const auto t0 = Clock::now();
  Checks c;
  std::ostringstream d;

  const auto fuzz = testing::reducer_fuzz(2024, 1'000'000);
  c.expect(fuzz.violations == 0, "fuzz: " + fuzz.first_violation);
  d << "fuzz " << fuzz.events << " events (" << fuzz.rejected << " rejected, " << fuzz.structural
    << " structural, " << fuzz.violations << " violations)";

  std::mt19937_64 rng(4242);
  const auto resize_bad = resize_mismatches(rng, 2000);
  c.expect(resize_bad == 0, "resize law");
  d << "; resize 10000 updates, " << resize_bad << " off";

  std::size_t snapped = 0;
  const auto boundary_bad = snap_boundary_mismatches(snapped);
  const auto sweep = testing::snap_sweep(99, 2000);
  c.expect(boundary_bad == 0, "snap boundary");
  c.expect(sweep.mismatches == 0, "snap sweep: " + sweep.first_failure);
  d << "; snap boundary 1203 drags (" << snapped << " combined), " << boundary_bad << " off; snap sweep "
    << sweep.trials << " trials (" << sweep.snapped << " snapped), " << sweep.mismatches << " off";

  std::size_t sequences = 0;
  const auto combine_bad = combine_split_mismatches(sequences);
  c.expect(combine_bad == 0, "combine/split");
  d << "; combine/split " << sequences << " sequences, " << combine_bad << " off";

  double worst_t = 0, worst_q = 0;
  std::string proxy_why;
  const auto proxy_bad = proxy_mismatches(rng, 500, worst_t, worst_q, proxy_why);
  c.expect(proxy_bad == 0, "proxy: " + proxy_why);
  d << "; proxy max translation error " << worst_t << " m, rotation error " << worst_q << " rad";
  d << "; " << seconds_since(t0) << " s";
  if (!c.ok()) d << "; first failure: " << c.first_failure();
  return {c.ok(), d.str()};
}

// --- determinism -------------------------------------------------------------

json strip_transport(json j) {
  j.erase("seq");
  j.erase("ack");
  j.erase("structural");
  return j;
}

struct RunningServer {
  Server server;
  std::thread thread;
  explicit RunningServer(ServerOptions o) : server(std::move(o)) {
    thread = std::thread([this] { server.run(); });
    for (int i = 0; i < 400 && !server.listening(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(25));
  }
  ~RunningServer() {
    server.stop();
    thread.join();
  }
};

Outcome determinism() {
  Checks c;
  std::ostringstream d;
  const auto script = SessionScript::load(session_path("wreck_reveal.session"));
  const auto a = replay(script);
  const auto b = replay(script);
  c.expect(a.all_passed() && b.all_passed(), "session assertions");
  c.expect(a.snapshots.size() == b.snapshots.size() && !a.snapshots.empty(), "snapshot count");
  for (std::size_t i = 0; i < std::min(a.snapshots.size(), b.snapshots.size()); ++i) {
    c.expect(a.snapshots[i].image == b.snapshots[i].image && a.snapshots[i].sha256 == b.snapshots[i].sha256,
             "snapshot " + a.snapshots[i].name + " differs");
  }
  c.expect(a.final_scene.serialize() == b.final_scene.serialize(), "final scene differs");
  d << "wreck reveal replayed twice: " << a.snapshots.size() << " identical snapshots, final scene identical";

  // Server-fed events against offline stepping of the same script.
  const auto walk = SessionScript::load(session_path("walkthrough.session"));
  std::size_t compared = 0, differing = 0;
  try {
    ServerOptions o;
    o.port = 0;
    o.scene_text = "volume kind=phantom\nphantom dims=8,8,8\nlayer z=1 value=0.5\n";
    o.camera.width = 16;
    o.camera.height = 12;
    o.frames_per_second = 2;
    o.render_workers = 1;
    RunningServer rs(std::move(o));
    if (!rs.server.listening()) throw std::runtime_error("server did not start");
    testing::WsClient client(rs.server.port());
    client.await([](const json& j) { return j["type"] == "SceneSummary"; });
    client.send({{"type", "LoadScene"}, {"id", "load"}, {"script", read_text_file(session_path("walkthrough.session"))}});
    const json loaded = client.await_ack("load");
    SceneState scene = walk.initial_scene();
    InteractionMode mode;
    c.expect(strip_transport(loaded) == scene_summary(scene, mode, walk.config), "summary after load");
    int id = 0;
    for (const auto& entry : walk.timeline) {
      const auto* e = std::get_if<InputEvent>(&entry.item);
      if (!e) continue;
      json msg = event_to_json(*e);
      msg["id"] = ++id;
      client.send(msg);
      const json got = client.await([&](const json& j) { return j.contains("ack") && j["ack"] == id; });
      auto r = step(scene, mode, *e, walk.config);
      scene = r.scene;
      mode = r.mode;
      ++compared;
      differing += strip_transport(got) != scene_summary(scene, mode, walk.config);
    }
    client.close();
  } catch (const std::exception& ex) {
    c.expect(false, std::string("server: ") + ex.what());
  }
  ReplayOptions quick;
  quick.render_snapshots = false;
  const auto offline = replay(walk, quick);
  c.expect(compared == offline.events && compared > 0, "event count");
  c.expect(differing == 0, "server summaries differ");
  d << "; server vs offline " << compared << " SceneSummaries, " << differing << " differ";
  if (!c.ok()) d << "; first failure: " << c.first_failure();
  return {c.ok(), d.str()};
}

// --- performance -------------------------------------------------------------

double median_frame_seconds(const SceneState& scene, const Camera& camera, int workers, int frames) {
  RenderSettings settings;
  settings.workers = workers;
  std::vector<double> t;
  for (int i = 0; i < frames; ++i) {
    const auto t0 = Clock::now();
    const auto fb = render_frame(scene, camera, TransferFunction::default_tf(), settings);
    t.push_back(seconds_since(t0));
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

Outcome performance() {
  const SceneState scene = benchmark_scene();
  const Camera camera = overview_camera(320, 240);
  const double single = median_frame_seconds(scene, camera, 1, 5);
  const double parallel = median_frame_seconds(scene, camera, 8, 5);
  std::ostringstream d;
  d << "320x240 DVR + MIP lens: 1 worker " << single * 1000 << " ms (<= 2000), 8 workers " << parallel * 1000
    << " ms (<= 500); hardware threads " << std::thread::hardware_concurrency() << ", kernels "
    << kernels::isa_name(kernels::active_isa());
  return {single <= 2.0 && parallel <= 0.5, d.str()};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"wreck reveal", wreck_reveal},       {"geometry oracles", geometry_oracles},
      {"rendering oracles", rendering_oracles}, {"reducer suite", reducer_suite},
      {"determinism", determinism},         {"performance", performance},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.passed;
    std::cout << (o.passed ? "PASS " : "FAIL ") << c.name << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
