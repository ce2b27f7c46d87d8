#include "maglens/scene.hpp"

#include "maglens/record.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>

namespace maglens {

VolumeSource VolumeSource::from_phantom(PhantomSpec spec) {
  VolumeSource s;
  s.kind = Kind::Phantom;
  s.phantom = std::move(spec);
  return s;
}

VolumeSource VolumeSource::from_raw(std::string raw_path, std::string meta_path) {
  VolumeSource s;
  s.kind = Kind::Raw;
  s.raw_path = std::move(raw_path);
  s.meta_path = std::move(meta_path);
  return s;
}

std::shared_ptr<const VolumeAsset> make_volume_asset(std::shared_ptr<const VolumeGrid> grid,
                                                     VolumeSource source) {
  auto asset = std::make_shared<VolumeAsset>();
  asset->gradient_reference = gradient_magnitude_quantile(*grid, 0.95);
  if (!(asset->gradient_reference > 0.0)) asset->gradient_reference = 1.0;
  asset->grid = std::move(grid);
  asset->source = std::move(source);
  return asset;
}

std::shared_ptr<const VolumeAsset> load_volume(const VolumeSource& source) {
  switch (source.kind) {
    case VolumeSource::Kind::None:
      return nullptr;
    case VolumeSource::Kind::Raw: {
      const auto meta = VolumeMeta::load(source.meta_path);
      return make_volume_asset(std::make_shared<const VolumeGrid>(load_raw(source.raw_path, meta)),
                               source);
    }
    case VolumeSource::Kind::Phantom: {
      static std::mutex mutex;
      static std::map<std::string, std::weak_ptr<const VolumeAsset>> cache;
      const std::string key = source.phantom->serialize();
      std::lock_guard lock(mutex);
      if (auto hit = cache[key].lock()) return hit;
      auto asset = make_volume_asset(
          std::make_shared<const VolumeGrid>(generate_phantom(*source.phantom)), source);
      cache[key] = asset;
      return asset;
    }
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

const Lens* SceneState::find(LensId id) const {
  auto it = std::lower_bound(lenses.begin(), lenses.end(), id,
                             [](const Lens& l, LensId v) { return l.id < v; });
  return it != lenses.end() && it->id == id ? &*it : nullptr;
}

Lens* SceneState::find(LensId id) {
  return const_cast<Lens*>(static_cast<const SceneState*>(this)->find(id));
}

LensId SceneState::next_id() const {
  return LensId{lenses.empty() ? 1u : lenses.back().id.value + 1};
}

void SceneState::insert(Lens lens) {
  auto it = std::lower_bound(lenses.begin(), lenses.end(), lens.id,
                             [](const Lens& l, LensId v) { return l.id < v; });
  if (it != lenses.end() && it->id == lens.id) {
    *it = std::move(lens);
  } else {
    lenses.insert(it, std::move(lens));
  }
}

bool SceneState::remove(LensId id) {
  auto it = std::find_if(lenses.begin(), lenses.end(), [&](const Lens& l) { return l.id == id; });
  if (it == lenses.end()) return false;
  lenses.erase(it);
  std::erase_if(appearances, [&](const LensAppearance& a) { return a.lens == id; });
  if (held == id) held.reset();
  return true;
}

std::string SceneState::check_invariants() const {
  std::set<LensId> ids;
  for (std::size_t i = 0; i < lenses.size(); ++i) {
    if (!ids.insert(lenses[i].id).second) return "duplicate lens id " + std::to_string(lenses[i].id.value);
    if (i > 0 && !(lenses[i - 1].id < lenses[i].id)) return "lenses not sorted by id";
    if (auto e = lenses[i].check_invariants(); !e.empty()) {
      return "lens " + std::to_string(lenses[i].id.value) + ": " + e;
    }
  }
  if (proxy) {
    if (!find(proxy->proxy) || !find(proxy->remote)) return "proxy binding references a missing lens";
    if (proxy->proxy == proxy->remote) return "proxy bound to itself";
    if (!(proxy->gain > 0.0)) return "proxy gain must be > 0";
  }
  if (held && !find(*held)) return "held lens does not exist";
  if (std::abs(head.orientation().norm() - 1.0) > 1e-6) return "head orientation not unit length";
  return {};
}

// ---------------------------------------------------------------------------
// Serialization

std::string stack_to_string(std::span<const EffectDescriptor> stack) {
  std::string out;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    if (i) out += '+';
    out += stack[i].to_token();
  }
  return out;
}

std::vector<EffectDescriptor> stack_from_string(std::string_view text) {
  std::vector<EffectDescriptor> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto plus = text.find('+', pos);
    out.push_back(effect_from_label(text.substr(pos, plus - pos)));
    if (plus == std::string_view::npos) break;
    pos = plus + 1;
  }
  return out;
}

Record lens_to_record(const Lens& lens) {
  Record r;
  r.keyword = "lens";
  r.add("id", std::to_string(lens.id.value));
  r.add("pose", lens.pose.to_string());
  r.add("radius", lens.radius);
  r.add("ring", lens.ring_width);
  r.add("front", lens.front_effect.to_token());
  r.add("back", lens.back_effect.to_token());
  if (lens.combined()) {
    r.add("stack", stack_to_string(lens.stack));
    std::vector<double> tree(lens.combine_tree.begin(), lens.combine_tree.end());
    r.add("tree", tree);
  }
  return r;
}

Lens lens_from_record(const Record& r) {
  Lens lens;
  const auto id = r.integer("id");
  if (id <= 0 || id > 0xffffffffLL) throw FormatError(r.line, "lens id must be a positive integer");
  lens.id = LensId{static_cast<std::uint32_t>(id)};
  lens.pose = Pose::parse(r.text("pose"), r.line);
  lens.radius = r.number("radius");
  lens.ring_width = r.number_or("ring", kDefaultRingWidth);
  try {
    lens.front_effect = effect_from_label(r.text("front"));
    lens.back_effect = r.has("back") ? effect_from_label(r.text("back")) : lens.front_effect;
    if (r.has("stack")) lens.stack = stack_from_string(r.text("stack"));
  } catch (const EffectError& e) {
    throw FormatError(r.line, e.what());
  }
  if (r.has("tree")) {
    for (double v : r.numbers("tree")) {
      if (v < 1 || v != std::floor(v)) throw FormatError(r.line, "tree entries must be positive integers");
      lens.combine_tree.push_back(static_cast<std::uint32_t>(v));
    }
  } else if (lens.stack.size() >= 2) {
    // Hand-written stacks without a tree unwind one effect at a time.
    for (std::size_t i = lens.stack.size() - 1; i >= 1; --i) lens.combine_tree.push_back(static_cast<std::uint32_t>(i));
  }
  if (auto e = lens.check_invariants(); !e.empty()) throw FormatError(r.line, e);
  return lens;
}

std::string SceneState::serialize() const {
  std::vector<Record> records;
  if (volume && volume->source.kind == VolumeSource::Kind::Raw) {
    Record r;
    r.keyword = "volume";
    r.add("raw", volume->source.raw_path).add("meta", volume->source.meta_path);
    records.push_back(r);
  } else if (volume && volume->source.kind == VolumeSource::Kind::Phantom) {
    Record r;
    r.keyword = "volume";
    r.add("kind", std::string("phantom"));
    records.push_back(r);
    for (auto& pr : parse_records(volume->source.phantom->serialize())) records.push_back(pr);
  }
  {
    Record r;
    r.keyword = "head";
    r.add("pose", head.to_string());
    records.push_back(r);
  }
  if (background != kDefaultBackground) {
    Record r;
    r.keyword = "background";
    r.add("rgb", std::array<double, 3>{double(background[0]), double(background[1]), double(background[2])});
    records.push_back(r);
  }
  for (const auto& l : lenses) records.push_back(lens_to_record(l));
  {
    Record r;
    r.keyword = "menu";
    r.add("page", std::to_string(menu.page)).add("anchor", menu.anchor.to_string());
    r.add("opened", menu.opened_at_ms);
    records.push_back(r);
  }
  if (proxy) {
    Record r;
    r.keyword = "proxy";
    r.add("proxy", std::to_string(proxy->proxy.value)).add("remote", std::to_string(proxy->remote.value));
    r.add("gain", proxy->gain).add("spawn", proxy->spawn_pose.to_string());
    records.push_back(r);
  }
  if (held) {
    Record r;
    r.keyword = "held";
    r.add("id", std::to_string(held->value));
    records.push_back(r);
  }
  {
    Record r;
    r.keyword = "clock";
    r.add("ms", clock_ms);
    records.push_back(r);
  }
  for (const auto& a : appearances) {
    Record r;
    r.keyword = "appear";
    r.add("id", std::to_string(a.lens.value)).add("start", a.start_ms);
    records.push_back(r);
  }
  return format_records(records);
}

SceneState SceneState::parse(std::string_view text, const std::string& base_dir) {
  SceneState scene;
  const auto records = parse_records(text);
  std::string phantom_text;
  bool have_phantom = false;
  auto resolve = [&](std::string_view p) {
    std::filesystem::path path(p);
    if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
    return path.lexically_normal().string();
  };
  VolumeSource source;
  for (const auto& r : records) {
    if (r.keyword == "volume") {
      if (r.has("raw")) {
        source = VolumeSource::from_raw(resolve(r.text("raw")), resolve(r.text("meta")));
      } else if (r.find("phantom") == "default") {
        source = VolumeSource::from_phantom(PhantomSpec::default_spec());
      } else if (r.has("phantom")) {
        source = VolumeSource::from_phantom(PhantomSpec::parse(read_text_file(resolve(r.text("phantom")))));
      } else if (r.find("kind") == "phantom") {
        have_phantom = true;
      } else {
        throw FormatError(r.line, "volume record needs raw=/meta=, phantom= or kind=phantom");
      }
    } else if (r.keyword == "phantom" || r.keyword == "layer" || r.keyword == "wreck") {
      phantom_text += r.to_line() + "\n";
    } else if (r.keyword == "head") {
      scene.head = Pose::parse(r.text("pose"), r.line);
    } else if (r.keyword == "background") {
      const auto v = r.numbers("rgb");
      if (v.size() != 3) throw FormatError(r.line, "background needs 3 channels");
      for (int i = 0; i < 3; ++i) scene.background[i] = static_cast<std::uint8_t>(std::clamp(v[i], 0.0, 255.0));
    } else if (r.keyword == "lens") {
      Lens lens = lens_from_record(r);
      if (scene.find(lens.id)) throw FormatError(r.line, "duplicate lens id");
      scene.insert(std::move(lens));
    } else if (r.keyword == "menu") {
      scene.menu.page = static_cast<std::size_t>(r.integer("page"));
      scene.menu.anchor = Pose::parse(r.text("anchor"), r.line);
      scene.menu.opened_at_ms = r.number_or("opened", 0.0);
    } else if (r.keyword == "proxy") {
      ProxyBinding b;
      b.proxy = LensId{static_cast<std::uint32_t>(r.integer("proxy"))};
      b.remote = LensId{static_cast<std::uint32_t>(r.integer("remote"))};
      b.gain = r.number("gain");
      b.spawn_pose = Pose::parse(r.text("spawn"), r.line);
      scene.proxy = b;
    } else if (r.keyword == "held") {
      scene.held = LensId{static_cast<std::uint32_t>(r.integer("id"))};
    } else if (r.keyword == "clock") {
      scene.clock_ms = r.number("ms");
    } else if (r.keyword == "appear") {
      scene.appearances.push_back({LensId{static_cast<std::uint32_t>(r.integer("id"))}, r.number("start")});
    } else {
      throw FormatError(r.line, "unknown scene record '" + r.keyword + "'");
    }
  }
  if (have_phantom || (!phantom_text.empty() && source.kind == VolumeSource::Kind::None)) {
    source = VolumeSource::from_phantom(PhantomSpec::parse(phantom_text));
  }
  scene.volume = load_volume(source);
  if (auto e = scene.check_invariants(); !e.empty()) throw FormatError(0, e);
  return scene;
}

SceneState SceneState::load(const std::string& path) {
  const auto dir = std::filesystem::path(path).parent_path().string();
  return parse(read_text_file(path), dir.empty() ? "." : dir);
}

}  // namespace maglens
