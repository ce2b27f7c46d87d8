#pragma once

#include "maglens/interaction.hpp"
#include "maglens/record.hpp"
#include "maglens/render.hpp"
#include "maglens/scene.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace maglens {

// Malformed or unresolvable script content; aborts replay.
class ScriptError : public std::runtime_error {
 public:
  ScriptError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

enum class QueryKind { LensCount, LensPose, LensRadius, LensStack, Mode };

struct SceneQuery {
  QueryKind kind = QueryKind::LensCount;
  std::optional<LensId> id;
  bool operator==(const SceneQuery&) const = default;
};

std::string_view query_name(QueryKind k);

struct SnapshotDirective {
  std::string name;
  bool operator==(const SnapshotDirective&) const = default;
};
struct SetTransferFunction {
  TransferFunction tf;
  bool operator==(const SetTransferFunction&) const = default;
};
struct AssertDirective {
  SceneQuery query;
  std::string expected;
  double tolerance = 0.0;  // numeric queries only
  bool operator==(const AssertDirective&) const = default;
};

using TimelineItem = std::variant<InputEvent, SnapshotDirective, SetTransferFunction, AssertDirective>;

struct TimelineEntry {
  TimelineItem item;
  int line = 0;
  bool operator==(const TimelineEntry& o) const { return item == o.item; }
};

// Line-oriented session script (grammar in docs/session_format.md).
struct SessionScript {
  std::vector<Record> scene_records;  // initial scene, in scene-file syntax
  Camera camera;
  TransferFunction tf = TransferFunction::default_tf();
  InteractionConfig config;
  double step = 0.0;  // render step, <= 0 for the default
  std::vector<TimelineEntry> timeline;
  std::string base_dir = ".";

  // Throws ScriptError (or FormatError) with the offending line.
  static SessionScript parse(std::string_view text, const std::string& base_dir = ".");
  static SessionScript load(const std::string& path);
  std::string serialize() const;

  SceneState initial_scene() const;
  bool operator==(const SessionScript& o) const;
};

Record event_to_record(const InputEvent& e);
InputEvent event_from_record(const Record& r);
Record config_to_record(const InteractionConfig& c);
InteractionConfig config_from_record(const Record& r);

// Value of the query against the live scene as text (numbers in shortest
// round-trip form). Throws ScriptError when the lens id does not resolve.
std::string evaluate_query(const SceneQuery& q, const SceneState& scene, const InteractionMode& mode);

struct AssertionResult {
  int line = 0;
  double timestamp_ms = 0;
  SceneQuery query;
  std::string expected;
  std::string actual;
  bool passed = false;
};

struct SnapshotResult {
  std::string name;
  double timestamp_ms = 0;
  Framebuffer image;
  std::string sha256;  // of the P6 encoding
  double render_ms = 0;
};

struct ReplayOptions {
  bool render_snapshots = true;
  int workers = 0;
};

struct ReplayResult {
  SceneState final_scene;
  InteractionMode final_mode;
  std::vector<SnapshotResult> snapshots;
  std::vector<AssertionResult> assertions;
  std::vector<FeedbackEvent> feedback;
  std::size_t events = 0;
  double reducer_ms = 0;
  double total_ms = 0;

  bool all_passed() const;
};

ReplayResult replay(const SessionScript& script, const ReplayOptions& options = {});

// Structured-text report: assertions, snapshot hashes, timings.
std::string format_report(const SessionScript& script, const ReplayResult& result,
                          const std::string& script_name);

struct GoldenReport {
  bool passed = false;
  int max_delta = 0;
  std::size_t pixels_over = 0;
  std::string error;  // set on resolution mismatch or unreadable golden
};

GoldenReport compare_framebuffers(const Framebuffer& fb, const Framebuffer& golden, int tolerance);
GoldenReport compare_golden(const Framebuffer& fb, const std::string& golden_path, int tolerance);

std::string sha256_hex(std::span<const std::uint8_t> bytes);

}  // namespace maglens
