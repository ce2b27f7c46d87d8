#include "maglens/session.hpp"

#include "maglens/image_io.hpp"
#include "maglens/kernels/sampling.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <set>

namespace maglens {

ScriptError::ScriptError(int line, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

std::string_view query_name(QueryKind k) {
  switch (k) {
    case QueryKind::LensCount:
      return "lens_count";
    case QueryKind::LensPose:
      return "lens_pose";
    case QueryKind::LensRadius:
      return "lens_radius";
    case QueryKind::LensStack:
      return "lens_stack";
    case QueryKind::Mode:
      return "mode";
  }
  return "lens_count";
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

QueryKind parse_query_kind(std::string_view s, int line) {
  for (auto k : {QueryKind::LensCount, QueryKind::LensPose, QueryKind::LensRadius, QueryKind::LensStack,
                 QueryKind::Mode}) {
    if (query_name(k) == s) return k;
  }
  throw ScriptError(line, "unknown query '" + std::string(s) + "'");
}

bool query_needs_id(QueryKind k) {
  return k == QueryKind::LensPose || k == QueryKind::LensRadius || k == QueryKind::LensStack;
}

std::string_view edge_name(ButtonEdge e) {
  switch (e) {
    case ButtonEdge::Pressed:
      return "press";
    case ButtonEdge::Released:
      return "release";
    case ButtonEdge::None:
      break;
  }
  return "none";
}

ButtonEdge parse_edge(std::string_view s, int line) {
  if (s == "none") return ButtonEdge::None;
  if (s == "press") return ButtonEdge::Pressed;
  if (s == "release") return ButtonEdge::Released;
  throw ScriptError(line, "menu edge must be none, press or release");
}

bool parse_flag(const Record& r, std::string_view key) {
  const auto v = r.find(key);
  if (!v) return false;
  if (*v == "1") return true;
  if (*v == "0") return false;
  throw ScriptError(r.line, "flag '" + std::string(key) + "' must be 0 or 1");
}

void add_hand(Record& r, const std::string& prefix, const HandState& h) {
  r.add(prefix, h.pose.to_string());
  if (h.grab_active) r.add(prefix + ".grab", std::string("1"));
  if (h.trigger_active) r.add(prefix + ".trig", std::string("1"));
  if (h.menu_button_edge != ButtonEdge::None) r.add(prefix + ".menu", std::string(edge_name(h.menu_button_edge)));
}

HandState read_hand(const Record& r, const std::string& prefix) {
  HandState h;
  if (r.has(prefix)) h.pose = Pose::parse(r.text(prefix), r.line);
  h.grab_active = parse_flag(r, prefix + ".grab");
  h.trigger_active = parse_flag(r, prefix + ".trig");
  if (auto m = r.find(prefix + ".menu")) h.menu_button_edge = parse_edge(*m, r.line);
  return h;
}

struct ConfigField {
  const char* key;
  double InteractionConfig::*member;
};

constexpr ConfigField kConfigFields[] = {
    {"grab", &InteractionConfig::grab_distance},
    {"ring", &InteractionConfig::ring_proximity},
    {"widget", &InteractionConfig::widget_radius},
    {"menu_offset", &InteractionConfig::menu_offset},
    {"menu_inner", &InteractionConfig::menu_inner_radius},
    {"menu_outer", &InteractionConfig::menu_outer_radius},
    {"menu_plane", &InteractionConfig::menu_plane_tolerance},
    {"proxy_distance", &InteractionConfig::proxy_distance},
    {"proxy_radius", &InteractionConfig::proxy_radius},
    {"raycast", &InteractionConfig::raycast_range},
    {"min_resize", &InteractionConfig::min_resize_distance},
    {"new_radius", &InteractionConfig::new_lens_radius},
    {"param_step", &InteractionConfig::param_step},
};

}  // namespace

Record event_to_record(const InputEvent& e) {
  Record r;
  r.keyword = "event";
  r.add("t", e.timestamp_ms);
  r.add("head", e.head.to_string());
  add_hand(r, "dom", e.dominant);
  add_hand(r, "ndom", e.non_dominant);
  return r;
}

InputEvent event_from_record(const Record& r) {
  static const std::set<std::string, std::less<>> known = {
      "t", "head", "dom", "dom.grab", "dom.trig", "dom.menu", "ndom", "ndom.grab", "ndom.trig", "ndom.menu"};
  for (const auto& [k, v] : r.fields) {
    if (!known.contains(k)) throw ScriptError(r.line, "unknown event field '" + k + "'");
  }
  InputEvent e;
  e.timestamp_ms = r.number("t");
  if (!std::isfinite(e.timestamp_ms)) throw ScriptError(r.line, "timestamp must be finite");
  if (r.has("head")) e.head = Pose::parse(r.text("head"), r.line);
  e.dominant = read_hand(r, "dom");
  e.non_dominant = read_hand(r, "ndom");
  return e;
}

Record config_to_record(const InteractionConfig& c) {
  const InteractionConfig d;
  Record r;
  r.keyword = "config";
  for (const auto& f : kConfigFields) {
    if (c.*f.member != d.*f.member) r.add(f.key, c.*f.member);
  }
  if (c.sections_per_page != d.sections_per_page) r.add("sections", static_cast<double>(c.sections_per_page));
  if (c.snap.center_fraction != d.snap.center_fraction) r.add("snap_center", c.snap.center_fraction);
  if (c.snap.max_angle_deg != d.snap.max_angle_deg) r.add("snap_angle", c.snap.max_angle_deg);
  if (c.snap.radius_fraction != d.snap.radius_fraction) r.add("snap_radius", c.snap.radius_fraction);
  return r;
}

InteractionConfig config_from_record(const Record& r) {
  InteractionConfig c;
  for (const auto& [key, value] : r.fields) {
    const double v = parse_number(value, r.line);
    if (!(v > 0.0) || !std::isfinite(v)) throw ScriptError(r.line, "config '" + key + "' must be positive");
    bool found = false;
    for (const auto& f : kConfigFields) {
      if (key == f.key) {
        c.*f.member = v;
        found = true;
      }
    }
    if (found) continue;
    if (key == "sections") {
      if (v != std::floor(v) || v > 360) throw ScriptError(r.line, "sections must be a whole number");
      c.sections_per_page = static_cast<std::size_t>(v);
    } else if (key == "snap_center") {
      c.snap.center_fraction = v;
    } else if (key == "snap_angle") {
      c.snap.max_angle_deg = v;
    } else if (key == "snap_radius") {
      c.snap.radius_fraction = v;
    } else {
      throw ScriptError(r.line, "unknown config key '" + key + "'");
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Script

SessionScript SessionScript::parse(std::string_view text, const std::string& base_dir) {
  SessionScript s;
  s.base_dir = base_dir;
  std::set<std::string> snapshot_names;
  std::optional<double> last_t;
  bool in_timeline = false;

  for (const auto& r : parse_records(text)) {
    const std::string& k = r.keyword;
    const bool timeline_record = k == "event" || k == "snapshot" || k == "settf" || k == "assert";
    if (!timeline_record && in_timeline) {
      throw ScriptError(r.line, "header record '" + k + "' after the timeline started");
    }
    if (k == "camera") {
      s.camera = Camera::from_record(r);
    } else if (k == "tf") {
      s.tf = TransferFunction::from_record(r);
    } else if (k == "config") {
      s.config = config_from_record(r);
    } else if (k == "render") {
      s.step = r.number_or("step", 0.0);
    } else if (k == "event") {
      in_timeline = true;
      InputEvent e = event_from_record(r);
      if (last_t && !(e.timestamp_ms > *last_t)) throw ScriptError(r.line, "timestamps must strictly increase");
      last_t = e.timestamp_ms;
      s.timeline.push_back({std::move(e), r.line});
    } else if (k == "snapshot") {
      in_timeline = true;
      std::string name(r.text("name"));
      if (!snapshot_names.insert(name).second) throw ScriptError(r.line, "duplicate snapshot name '" + name + "'");
      for (char c : name) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) {
          throw ScriptError(r.line, "snapshot names use letters, digits, '_', '-' and '.'");
        }
      }
      s.timeline.push_back({SnapshotDirective{std::move(name)}, r.line});
    } else if (k == "settf") {
      in_timeline = true;
      Record tf = r;
      tf.keyword = "tf";
      s.timeline.push_back({SetTransferFunction{TransferFunction::from_record(tf)}, r.line});
    } else if (k == "assert") {
      in_timeline = true;
      AssertDirective a;
      a.query.kind = parse_query_kind(r.text("query"), r.line);
      if (query_needs_id(a.query.kind)) {
        const auto id = r.integer("id");
        if (id <= 0) throw ScriptError(r.line, "lens id must be positive");
        a.query.id = LensId{static_cast<std::uint32_t>(id)};
      }
      a.expected = std::string(r.text("expected"));
      a.tolerance = r.number_or("tol", 0.0);
      s.timeline.push_back({std::move(a), r.line});
    } else {
      s.scene_records.push_back(r);
    }
  }
  return s;
}

SessionScript SessionScript::load(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ScriptError(0, "file not found: " + path);
  const auto dir = std::filesystem::path(path).parent_path().string();
  return parse(read_text_file(path), dir.empty() ? "." : dir);
}

std::string SessionScript::serialize() const {
  std::vector<Record> out = scene_records;
  Record cam = camera.to_record();
  cam.fields.erase(std::remove_if(cam.fields.begin(), cam.fields.end(),
                                  [](const auto& f) { return f.first == "pose"; }),
                   cam.fields.end());
  out.push_back(cam);
  out.push_back(tf.to_record());
  if (const auto c = config_to_record(config); !c.fields.empty()) out.push_back(c);
  if (step > 0.0) {
    Record r;
    r.keyword = "render";
    r.add("step", step);
    out.push_back(r);
  }
  for (const auto& entry : timeline) {
    Record r;
    if (auto* e = std::get_if<InputEvent>(&entry.item)) {
      r = event_to_record(*e);
    } else if (auto* s = std::get_if<SnapshotDirective>(&entry.item)) {
      r.keyword = "snapshot";
      r.add("name", s->name);
    } else if (auto* t = std::get_if<SetTransferFunction>(&entry.item)) {
      r = t->tf.to_record();
      r.keyword = "settf";
    } else if (auto* a = std::get_if<AssertDirective>(&entry.item)) {
      r.keyword = "assert";
      r.add("query", std::string(query_name(a->query.kind)));
      if (a->query.id) r.add("id", std::to_string(a->query.id->value));
      r.add("expected", a->expected);
      if (a->tolerance != 0.0) r.add("tol", a->tolerance);
    }
    out.push_back(std::move(r));
  }
  return format_records(out);
}

SceneState SessionScript::initial_scene() const { return SceneState::parse(format_records(scene_records), base_dir); }

bool SessionScript::operator==(const SessionScript& o) const {
  if (scene_records.size() != o.scene_records.size()) return false;
  for (std::size_t i = 0; i < scene_records.size(); ++i) {
    if (scene_records[i].to_line() != o.scene_records[i].to_line()) return false;
  }
  return camera.fov_deg == o.camera.fov_deg && camera.width == o.camera.width &&
         camera.height == o.camera.height && tf == o.tf && config == o.config && step == o.step &&
         timeline == o.timeline;
}

// ---------------------------------------------------------------------------
// Replay

std::string evaluate_query(const SceneQuery& q, const SceneState& scene, const InteractionMode& mode) {
  if (q.kind == QueryKind::LensCount) return std::to_string(scene.lenses.size());
  if (q.kind == QueryKind::Mode) return mode.name();
  const Lens* lens = q.id ? scene.find(*q.id) : nullptr;
  if (!lens) throw ScriptError(0, "lens " + std::to_string(q.id ? q.id->value : 0) + " does not exist");
  switch (q.kind) {
    case QueryKind::LensPose:
      return lens->pose.to_string();
    case QueryKind::LensRadius:
      return format_number(lens->radius);
    case QueryKind::LensStack: {
      if (!lens->combined()) return effect_label(lens->front_effect);
      std::string out;
      for (const auto& d : lens->stack) out += (out.empty() ? "" : "+") + effect_label(d);
      return out;
    }
    default:
      return {};
  }
}

namespace {

bool assertion_holds(const AssertDirective& a, const std::string& actual, int line) {
  switch (a.query.kind) {
    case QueryKind::LensCount:
    case QueryKind::LensRadius:
      return std::abs(parse_number(a.expected, line) - parse_number(actual, line)) <= a.tolerance;
    case QueryKind::LensPose: {
      const auto e = parse_numbers(a.expected, line);
      const auto v = parse_numbers(actual, line);
      if (e.size() != 7) throw ScriptError(line, "expected pose needs 7 numbers");
      for (std::size_t i = 0; i < 7; ++i) {
        if (!(std::abs(e[i] - v[i]) <= a.tolerance)) return false;
      }
      return true;
    }
    case QueryKind::LensStack:
    case QueryKind::Mode:
      return a.expected == actual;
  }
  return false;
}

}  // namespace

bool ReplayResult::all_passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const AssertionResult& a) { return a.passed; });
}

ReplayResult replay(const SessionScript& script, const ReplayOptions& options) {
  const auto start = Clock::now();
  ReplayResult result;
  SceneState scene = script.initial_scene();
  InteractionMode mode;
  TransferFunction tf = script.tf;
  double now = scene.clock_ms;

  for (const auto& entry : script.timeline) {
    if (auto* e = std::get_if<InputEvent>(&entry.item)) {
      const auto t0 = Clock::now();
      auto out = step(std::move(scene), std::move(mode), *e, script.config);
      result.reducer_ms += ms_since(t0);
      scene = std::move(out.scene);
      mode = std::move(out.mode);
      result.feedback.insert(result.feedback.end(), out.feedback.begin(), out.feedback.end());
      now = e->timestamp_ms;
      ++result.events;
    } else if (auto* s = std::get_if<SnapshotDirective>(&entry.item)) {
      SnapshotResult snap;
      snap.name = s->name;
      snap.timestamp_ms = now;
      if (options.render_snapshots) {
        Camera camera = script.camera;
        camera.pose = scene.head;
        RenderSettings settings;
        settings.step = script.step;
        settings.workers = options.workers;
        const auto t0 = Clock::now();
        snap.image = render_frame(scene, camera, tf, settings);
        snap.render_ms = ms_since(t0);
        snap.sha256 = sha256_hex(encode_ppm(snap.image));
      }
      result.snapshots.push_back(std::move(snap));
    } else if (auto* t = std::get_if<SetTransferFunction>(&entry.item)) {
      tf = t->tf;
    } else if (auto* a = std::get_if<AssertDirective>(&entry.item)) {
      AssertionResult ar;
      ar.line = entry.line;
      ar.timestamp_ms = now;
      ar.query = a->query;
      ar.expected = a->expected;
      try {
        ar.actual = evaluate_query(a->query, scene, mode);
      } catch (const ScriptError& err) {
        throw ScriptError(entry.line, err.what());
      }
      ar.passed = assertion_holds(*a, ar.actual, entry.line);
      result.assertions.push_back(std::move(ar));
    }
  }
  result.final_scene = std::move(scene);
  result.final_mode = std::move(mode);
  result.total_ms = ms_since(start);
  return result;
}

std::string format_report(const SessionScript& script, const ReplayResult& result, const std::string& script_name) {
  std::vector<Record> out;
  const auto failed = std::count_if(result.assertions.begin(), result.assertions.end(),
                                    [](const AssertionResult& a) { return !a.passed; });
  Record head;
  head.keyword = "report";
  head.add("script", script_name)
      .add("events", static_cast<double>(result.events))
      .add("snapshots", static_cast<double>(result.snapshots.size()))
      .add("assertions", static_cast<double>(result.assertions.size()))
      .add("failed", static_cast<double>(failed))
      .add("result", std::string(failed == 0 ? "pass" : "fail"));
  out.push_back(head);

  Record timing;
  timing.keyword = "timing";
  timing.add("reducer_ms", std::round(result.reducer_ms * 1000.0) / 1000.0)
      .add("total_ms", std::round(result.total_ms * 1000.0) / 1000.0)
      .add("kernels", std::string(kernels::isa_name(kernels::active_isa())));
  out.push_back(timing);

  for (const auto& s : result.snapshots) {
    Record r;
    r.keyword = "snapshot";
    r.add("name", s.name).add("t", s.timestamp_ms).add("sha256", s.sha256.empty() ? "-" : s.sha256);
    r.add("width", static_cast<double>(script.camera.width)).add("height", static_cast<double>(script.camera.height));
    r.add("render_ms", std::round(s.render_ms * 1000.0) / 1000.0);
    out.push_back(r);
  }
  for (const auto& a : result.assertions) {
    Record r;
    r.keyword = "assert";
    r.add("line", static_cast<double>(a.line)).add("t", a.timestamp_ms);
    r.add("query", std::string(query_name(a.query.kind)));
    if (a.query.id) r.add("id", std::to_string(a.query.id->value));
    r.add("expected", a.expected).add("actual", a.actual).add("result", std::string(a.passed ? "pass" : "fail"));
    out.push_back(r);
  }
  const std::string scene_text = result.final_scene.serialize();
  Record fin;
  fin.keyword = "final";
  fin.add("lenses", static_cast<double>(result.final_scene.lenses.size()))
      .add("mode", result.final_mode.name())
      .add("scene_sha256",
           sha256_hex({reinterpret_cast<const std::uint8_t*>(scene_text.data()), scene_text.size()}));
  out.push_back(fin);
  return format_records(out);
}

// ---------------------------------------------------------------------------
// Golden images

GoldenReport compare_framebuffers(const Framebuffer& fb, const Framebuffer& golden, int tolerance) {
  GoldenReport rep;
  if (fb.width != golden.width || fb.height != golden.height) {
    rep.error = "resolution mismatch: " + std::to_string(fb.width) + "x" + std::to_string(fb.height) +
                " vs golden " + std::to_string(golden.width) + "x" + std::to_string(golden.height);
    return rep;
  }
  for (std::size_t i = 0; i < fb.rgba.size(); i += 4) {
    int worst = 0;
    for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(int(fb.rgba[i + c]) - int(golden.rgba[i + c])));
    rep.max_delta = std::max(rep.max_delta, worst);
    if (worst > tolerance) ++rep.pixels_over;
  }
  rep.passed = rep.pixels_over == 0;
  return rep;
}

GoldenReport compare_golden(const Framebuffer& fb, const std::string& golden_path, int tolerance) {
  try {
    return compare_framebuffers(fb, read_image(golden_path), tolerance);
  } catch (const ImageError& e) {
    GoldenReport rep;
    rep.error = e.what();
    return rep;
  }
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

}  // namespace maglens
