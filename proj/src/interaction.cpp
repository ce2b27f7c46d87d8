#include "maglens/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace maglens {

std::string_view hand_name(Hand h) { return h == Hand::Dominant ? "dominant" : "non_dominant"; }

std::string_view feedback_kind_name(FeedbackKind k) {
  switch (k) {
    case FeedbackKind::Haptic:
      return "haptic";
    case FeedbackKind::Audio:
      return "audio";
    case FeedbackKind::Visual:
      return "visual";
  }
  return "visual";
}

std::string InteractionMode::name() const {
  static constexpr const char* names[] = {"Idle", "Grabbing", "TwoHandResize", "MenuOpen", "ProxyActive"};
  return names[state.index()];
}

// ---------------------------------------------------------------------------
// Sub-gestures

double point_disc_distance(const Lens& lens, const Vec3& p) {
  const Vec3 local = lens.pose.inverse_transform_point(p);
  const double radial = std::hypot(local.x(), local.y());
  if (radial <= lens.radius) return std::abs(local.z());
  return std::hypot(radial - lens.radius, local.z());
}

std::optional<LensId> grab_test(const SceneState& scene, const Pose& hand, const InteractionConfig& config) {
  std::optional<LensId> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& lens : scene.lenses) {  // sorted by id, so ties keep the smaller id
    const double d = point_disc_distance(lens, hand.position());
    if (d <= config.grab_distance && d < best_d) {
      best = lens.id;
      best_d = d;
    }
  }
  return best;
}

Lens grabbed_update(const Lens& lens, const Pose& offset, const Pose& hand) {
  Lens out = lens;
  out.pose = hand.compose(offset);
  return out;
}

double resize_update(double d0, double r0, double d, const InteractionConfig& config) {
  if (!(d0 > config.min_resize_distance)) throw InvalidOperation("hands too close to start a resize");
  return std::clamp(r0 * d / d0, kMinLensRadius, kMaxLensRadius);
}

Vec3 ring_widget_position(const Lens& lens, double angle_deg) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  return lens.pose.transform_point(Vec3(lens.radius * std::cos(a), lens.radius * std::sin(a), 0.0));
}

double point_ring_distance(const Lens& lens, const Vec3& p) {
  const Vec3 local = lens.pose.inverse_transform_point(p);
  return std::hypot(std::hypot(local.x(), local.y()) - lens.radius, local.z());
}

namespace {

const EffectDescriptor& adjust_target(const Lens& lens) {
  return lens.combined() ? lens.stack.back() : lens.front_effect;
}

EffectDescriptor cycle(const EffectDescriptor& d) {
  const auto& reg = effect_registry();
  const auto i = registry_index(d);
  return reg[i ? (*i + 1) % reg.size() : 0].descriptor;
}

}  // namespace

std::optional<RingCommand> ring_control_step(const Lens& lens, const Pose& hand, bool trigger_pressed,
                                             const InteractionConfig& config) {
  if (!trigger_pressed) return std::nullopt;
  const Vec3 p = hand.position();
  if (!(point_ring_distance(lens, p) <= config.ring_proximity)) return std::nullopt;
  static constexpr RingCommandKind kinds[] = {RingCommandKind::CycleFrontEffect,
                                              RingCommandKind::CycleBackEffect, RingCommandKind::AdjustParam,
                                              RingCommandKind::Split};
  std::optional<int> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    if (kinds[i] == RingCommandKind::Split && !lens.combined()) continue;
    const double d = (ring_widget_position(lens, 90.0 * i) - p).norm();
    if (d <= config.widget_radius && d < best_d) {
      best = i;
      best_d = d;
    }
  }
  if (!best) return std::nullopt;
  RingCommand cmd{kinds[*best], {}, 0.0};
  if (cmd.kind == RingCommandKind::AdjustParam) {
    const auto schema = adjust_target(lens).schema();
    if (schema.empty()) return std::nullopt;
    const Vec3 local = lens.pose.inverse_transform_point(p);
    cmd.param = std::string(schema.front().name);
    cmd.delta = std::hypot(local.x(), local.y()) > lens.radius ? config.param_step : -config.param_step;
  }
  return cmd;
}

Lens apply_ring_command(const Lens& lens, const RingCommand& cmd) {
  Lens out = lens;
  switch (cmd.kind) {
    case RingCommandKind::CycleFrontEffect:
      if (lens.combined()) throw InvalidOperation("combined lenses render their stack on both faces");
      out.front_effect = cycle(lens.front_effect);
      break;
    case RingCommandKind::CycleBackEffect:
      if (lens.combined()) throw InvalidOperation("combined lenses render their stack on both faces");
      out.back_effect = cycle(lens.back_effect);
      break;
    case RingCommandKind::AdjustParam:
      if (lens.combined()) {
        out.stack.back() = lens.stack.back().adjusted(cmd.param, cmd.delta);
      } else {
        out.front_effect = lens.front_effect.adjusted(cmd.param, cmd.delta);
      }
      break;
    case RingCommandKind::Split:
      throw InvalidOperation("split is applied by the reducer");
  }
  return out;
}

std::optional<LensId> snap_partner(const SceneState& scene, LensId held, const InteractionConfig& config) {
  const Lens* h = scene.find(held);
  if (!h) return std::nullopt;
  auto bound = [&](LensId id) { return scene.proxy && (scene.proxy->proxy == id || scene.proxy->remote == id); };
  if (bound(held)) return std::nullopt;
  std::optional<LensId> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& other : scene.lenses) {
    if (other.id == held || bound(other.id)) continue;
    if (!overlap_near_maximal(*h, other, config.snap)) continue;
    const double d = (other.center() - h->center()).norm();
    if (d < best_d) {
      best = other.id;
      best_d = d;
    }
  }
  return best;
}

std::optional<LensId> raycast_select(const SceneState& scene, const Pose& controller,
                                     const InteractionConfig& config) {
  const Ray ray(controller.position(), controller.transform_vector(Vec3(0.0, 0.0, -1.0)));
  std::optional<LensId> best;
  double best_t = std::numeric_limits<double>::infinity();
  for (const auto& lens : scene.lenses) {
    const auto hit = ray_disc_hit(lens, ray);
    if (hit && hit->t <= config.raycast_range && hit->t < best_t) {
      best = lens.id;
      best_t = hit->t;
    }
  }
  return best;
}

std::pair<SceneState, ProxyBinding> spawn_proxy(SceneState scene, LensId remote, const Pose& head,
                                                const InteractionConfig& config) {
  const Lens* r = scene.find(remote);
  if (!r) throw InvalidOperation("remote lens does not exist");
  if (scene.proxy) throw InvalidOperation("a proxy is already bound");
  Lens proxy = *r;
  proxy.id = scene.next_id();
  proxy.pose = Pose(head.transform_point(Vec3(0.0, 0.0, -config.proxy_distance)), head.orientation());
  proxy.radius = config.proxy_radius;
  const double distance = (r->center() - head.position()).norm();
  ProxyBinding binding{proxy.id, remote, std::max(distance / config.proxy_distance, 1e-9), proxy.pose};
  scene.appearances.push_back({proxy.id, scene.clock_ms});
  scene.insert(std::move(proxy));
  scene.proxy = binding;
  return {std::move(scene), binding};
}

SceneState dismiss_proxy(SceneState scene) {
  if (!scene.proxy) return scene;
  const LensId id = scene.proxy->proxy;
  scene.proxy.reset();
  scene.remove(id);
  return scene;
}

SceneState proxy_apply(const ProxyBinding& binding, const Pose& before, const Pose& after, SceneState scene) {
  if (before == after) return scene;
  Lens* remote = scene.find(binding.remote);
  if (!remote) return scene;
  const Quat dq = after.orientation() * before.orientation().conjugate();
  const Vec3 dt = after.position() - before.position();
  remote->pose = Pose(remote->center() + binding.gain * dt, dq * remote->pose.orientation());
  return scene;
}

// ---------------------------------------------------------------------------
// Reducer

namespace {

bool finite_pose(const Pose& p) {
  for (double v : p.to_array()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool valid_event(const InputEvent& e) {
  return std::isfinite(e.timestamp_ms) && finite_pose(e.head) && finite_pose(e.dominant.pose) &&
         finite_pose(e.non_dominant.pose);
}

Hand other_hand(Hand h) { return h == Hand::Dominant ? Hand::NonDominant : Hand::Dominant; }

class Reducer {
 public:
  Reducer(SceneState& scene, InteractionMode& mode, const InputEvent& ev, const InteractionConfig& cfg,
          StepResult& out)
      : scene_(scene), mode_(mode), ev_(ev), cfg_(cfg), out_(out) {}

  void run() {
    scene_.head = ev_.head;
    scene_.clock_ms = ev_.timestamp_ms;
    std::erase_if(scene_.appearances, [&](const LensAppearance& a) {
      return scene_.clock_ms - a.start_ms >= 300.0;
    });
    drop_stale_mode();

    menu_buttons();
    grabs();
    triggers();

    settle_mode();
    mode_.dominant_grab = ev_.dominant.grab_active;
    mode_.non_dominant_grab = ev_.non_dominant.grab_active;
    mode_.dominant_trigger = ev_.dominant.trigger_active;
    mode_.non_dominant_trigger = ev_.non_dominant.trigger_active;
    mode_.last_timestamp_ms = ev_.timestamp_ms;
  }

 private:
  bool grab_pressed(Hand h) const {
    return ev_.hand(h).grab_active && !(h == Hand::Dominant ? mode_.dominant_grab : mode_.non_dominant_grab);
  }
  bool trigger_pressed(Hand h) const {
    return ev_.hand(h).trigger_active &&
           !(h == Hand::Dominant ? mode_.dominant_trigger : mode_.non_dominant_trigger);
  }

  void emit(FeedbackKind kind, std::optional<Hand> hand, std::optional<LensId> lens, std::string code) {
    out_.feedback.push_back({kind, hand, lens, std::move(code)});
  }
  void reject(std::optional<Hand> hand, std::optional<LensId> lens = std::nullopt) {
    emit(FeedbackKind::Audio, hand, lens, "reject");
  }

  bool is_proxy(LensId id) const { return scene_.proxy && scene_.proxy->proxy == id; }

  std::optional<LensId> active_lens() const {
    if (auto* g = std::get_if<Grabbing>(&mode_.state)) return g->lens;
    if (auto* r = std::get_if<TwoHandResize>(&mode_.state)) return r->lens;
    return std::nullopt;
  }

  void drop_stale_mode() {
    if (auto id = active_lens(); id && !scene_.find(*id)) {
      mode_.state = Idle{};
      scene_.held.reset();
    }
  }

  void remove_lens(LensId id, std::optional<Hand> hand) {
    if (is_proxy(id)) {
      scene_ = dismiss_proxy(std::move(scene_));
      emit(FeedbackKind::Visual, hand, id, "proxy-dismiss");
    } else if (scene_.proxy && scene_.proxy->remote == id) {
      const LensId proxy = scene_.proxy->proxy;
      scene_ = dismiss_proxy(std::move(scene_));
      scene_.remove(id);
      emit(FeedbackKind::Visual, hand, proxy, "proxy-lost");
    } else {
      scene_.remove(id);
    }
    emit(FeedbackKind::Audio, hand, id, "remove");
    if (active_lens() && !scene_.find(*active_lens())) mode_.state = Idle{};
    if (scene_.held && !scene_.find(*scene_.held)) scene_.held.reset();
    out_.structural = true;
  }

  void menu_buttons() {
    const bool dom = ev_.dominant.menu_button_edge == ButtonEdge::Pressed;
    const bool ndom = ev_.non_dominant.menu_button_edge == ButtonEdge::Pressed;
    if (!dom && !ndom) return;
    if (auto id = active_lens(); id && is_proxy(*id)) {
      scene_ = dismiss_proxy(std::move(scene_));
      scene_.held.reset();
      mode_.state = Idle{};
      emit(FeedbackKind::Visual, dom ? Hand::Dominant : Hand::NonDominant, *id, "proxy-dismiss");
      out_.structural = true;
      return;
    }
    if (!ndom) return;
    mode_.menu_visible = !mode_.menu_visible;
    if (mode_.menu_visible) scene_.menu.opened_at_ms = ev_.timestamp_ms;
    emit(FeedbackKind::Visual, Hand::NonDominant, std::nullopt, mode_.menu_visible ? "menu-open" : "menu-close");
  }

  void start_grab(Hand hand, LensId id) {
    const Pose& hp = ev_.hand(hand).pose;
    mode_.state = Grabbing{id, hand, hp.inverse().compose(scene_.find(id)->pose), hp};
    scene_.held = id;
    emit(FeedbackKind::Haptic, hand, id, "grab");
  }

  void start_resize(LensId id) {
    const double d0 = (ev_.dominant.pose.position() - ev_.non_dominant.pose.position()).norm();
    if (!(d0 > cfg_.min_resize_distance)) {
      reject(std::nullopt, id);
      return;
    }
    TwoHandResize r{id, d0, scene_.find(id)->radius, std::nullopt};
    if (is_proxy(id)) {
      if (const Lens* remote = scene_.find(scene_.proxy->remote)) r.remote_r0 = remote->radius;
    }
    mode_.state = r;
    emit(FeedbackKind::Haptic, std::nullopt, id, "resize");
  }

  void release(LensId id, Hand hand) {
    mode_.state = Idle{};
    scene_.held.reset();
    emit(FeedbackKind::Haptic, hand, id, "release");
    released_ = id;
    released_hand_ = hand;
  }

  void grabs() {
    if (auto* g = std::get_if<Grabbing>(&mode_.state)) {
      const Grabbing grab = *g;
      if (!ev_.hand(grab.hand).grab_active) {
        release(grab.lens, grab.hand);
        return;
      }
      const Hand other = other_hand(grab.hand);
      if (grab_pressed(other) && grab_test(scene_, ev_.hand(other).pose, cfg_) == grab.lens) {
        start_resize(grab.lens);
        if (std::holds_alternative<TwoHandResize>(mode_.state)) return;
      }
      move_held(grab);
      return;
    }
    if (auto* r = std::get_if<TwoHandResize>(&mode_.state)) {
      const TwoHandResize rs = *r;
      const bool dom = ev_.dominant.grab_active;
      const bool ndom = ev_.non_dominant.grab_active;
      if (!dom && !ndom) {
        release(rs.lens, Hand::Dominant);
      } else if (!dom || !ndom) {
        start_grab(dom ? Hand::Dominant : Hand::NonDominant, rs.lens);
      } else {
        resize(rs);
      }
      return;
    }
    for (Hand h : {Hand::Dominant, Hand::NonDominant}) {
      if (!grab_pressed(h)) continue;
      if (auto id = grab_test(scene_, ev_.hand(h).pose, cfg_)) {
        start_grab(h, *id);
        return;
      }
    }
  }

  void move_held(const Grabbing& grab_copy) {
    auto* g = std::get_if<Grabbing>(&mode_.state);
    const Pose& hp = ev_.hand(grab_copy.hand).pose;
    if (hp == g->last_hand) return;
    g->last_hand = hp;
    Lens* lens = scene_.find(g->lens);
    const Pose before = lens->pose;
    *lens = grabbed_update(*lens, g->offset, hp);
    if (is_proxy(g->lens)) {
      scene_ = proxy_apply(*scene_.proxy, before, lens->pose, std::move(scene_));
      return;
    }
    if (auto partner = snap_partner(scene_, g->lens, cfg_)) {
      const Lens* held = scene_.find(g->lens);
      if (auto combined = combine(*held, *scene_.find(*partner), scene_.head.position(), cfg_.snap)) {
        scene_.remove(*partner);
        scene_.insert(std::move(*combined));
        emit(FeedbackKind::Haptic, grab_copy.hand, grab_copy.lens, "snap");
        emit(FeedbackKind::Audio, grab_copy.hand, grab_copy.lens, "snap");
        out_.structural = true;
      }
    }
  }

  void resize(const TwoHandResize& rs) {
    const double d = (ev_.dominant.pose.position() - ev_.non_dominant.pose.position()).norm();
    Lens* lens = scene_.find(rs.lens);
    lens->radius = resize_update(rs.d0, rs.r0, d, cfg_);
    if (rs.remote_r0 && scene_.proxy) {
      if (Lens* remote = scene_.find(scene_.proxy->remote)) {
        remote->radius = resize_update(rs.d0, *rs.remote_r0, d, cfg_);
      }
    }
  }

  void triggers() {
    const bool dom_pressed = trigger_pressed(Hand::Dominant);
    bool dom_consumed = false;

    if (mode_.menu_visible) {
      std::optional<Vec3> release_point;
      if (released_) release_point = scene_.find(*released_)->center();
      auto [menu, cmd] = menu_step(scene_.menu, ev_, dom_pressed, release_point, cfg_);
      scene_.menu = menu;
      if (cmd) {
        switch (cmd->kind) {
          case MenuCommandKind::RemoveHeldLens:
            remove_lens(*released_, released_hand_);
            break;
          case MenuCommandKind::NextPage:
            dom_consumed = dom_pressed;
            emit(FeedbackKind::Haptic, Hand::Dominant, std::nullopt, "menu-page");
            break;
          case MenuCommandKind::CreateLens:
            dom_consumed = true;
            create_lens(cmd->template_index);
            break;
        }
      }
    } else {
      scene_.menu.anchor = menu_anchor_for(ev_.non_dominant.pose, cfg_);
    }

    for (Hand h : {Hand::Dominant, Hand::NonDominant}) {
      if (!trigger_pressed(h) || (h == Hand::Dominant && dom_consumed)) continue;
      if (ring_controls(h) && h == Hand::Dominant) dom_consumed = true;
    }

    if (dom_pressed && !dom_consumed) {
      if (auto id = raycast_select(scene_, ev_.dominant.pose, cfg_)) {
        if (scene_.proxy || is_proxy(*id)) {
          reject(Hand::Dominant, *id);
        } else {
          scene_ = spawn_proxy(std::move(scene_), *id, ev_.head, cfg_).first;
          emit(FeedbackKind::Visual, Hand::Dominant, *id, "proxy-spawn");
          out_.structural = true;
        }
      }
    }
  }

  void create_lens(std::size_t template_index) {
    Lens lens;
    lens.id = scene_.next_id();
    lens.pose = scene_.menu.anchor;
    lens.radius = cfg_.new_lens_radius;
    lens.front_effect = effect_registry()[template_index].descriptor;
    lens.back_effect = effect_from_label("dvr");
    scene_.appearances.push_back({lens.id, ev_.timestamp_ms});
    emit(FeedbackKind::Haptic, Hand::Dominant, lens.id, "menu-pick");
    scene_.insert(std::move(lens));
    out_.structural = true;
  }

  // Returns true when a widget was hit.
  bool ring_controls(Hand h) {
    const Vec3 p = ev_.hand(h).pose.position();
    const Lens* nearest = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& lens : scene_.lenses) {
      const double d = point_ring_distance(lens, p);
      if (d <= cfg_.ring_proximity && d < best) {
        nearest = &lens;
        best = d;
      }
    }
    if (!nearest) return false;
    const auto cmd = ring_control_step(*nearest, ev_.hand(h).pose, true, cfg_);
    if (!cmd) return false;

    const LensId target_id = is_proxy(nearest->id) ? scene_.proxy->remote : nearest->id;
    const Lens* target = scene_.find(target_id);
    if (!target) return true;
    try {
      if (cmd->kind == RingCommandKind::Split) {
        auto [first, second] = split(*target, scene_.next_id());
        scene_.appearances.push_back({second.id, ev_.timestamp_ms});
        emit(FeedbackKind::Haptic, h, first.id, "split");
        scene_.insert(std::move(first));
        scene_.insert(std::move(second));
        out_.structural = true;
      } else {
        // A combined lens's AdjustParam targets its top effect; the widget
        // computed the parameter from the lens under the hand.
        RingCommand c = *cmd;
        if (c.kind == RingCommandKind::AdjustParam) {
          const auto schema = adjust_target(*target).schema();
          if (schema.empty()) throw InvalidOperation("effect has no parameter");
          c.param = std::string(schema.front().name);
        }
        scene_.insert(apply_ring_command(*target, c));
        emit(FeedbackKind::Haptic, h, target_id, "ring");
      }
    } catch (const std::exception&) {
      reject(h, target_id);
      return true;
    }
    sync_proxy();
    return true;
  }

  // The proxy previews the remote lens's effects.
  void sync_proxy() {
    if (!scene_.proxy) return;
    const Lens* remote = scene_.find(scene_.proxy->remote);
    Lens* proxy = scene_.find(scene_.proxy->proxy);
    if (!remote || !proxy) return;
    proxy->front_effect = remote->front_effect;
    proxy->back_effect = remote->back_effect;
    proxy->stack = remote->stack;
    proxy->combine_tree = remote->combine_tree;
  }

  void settle_mode() {
    if (active_lens()) return;
    if (scene_.proxy) {
      mode_.state = ProxyActive{*scene_.proxy};
    } else if (mode_.menu_visible) {
      mode_.state = MenuOpen{scene_.menu.page};
    } else {
      mode_.state = Idle{};
    }
  }

  SceneState& scene_;
  InteractionMode& mode_;
  const InputEvent& ev_;
  const InteractionConfig& cfg_;
  StepResult& out_;
  std::optional<LensId> released_;
  std::optional<Hand> released_hand_;
};

}  // namespace

StepResult step(SceneState scene, InteractionMode mode, const InputEvent& event, const InteractionConfig& config) {
  StepResult out;
  if (!valid_event(event) || (mode.last_timestamp_ms && !(event.timestamp_ms > *mode.last_timestamp_ms))) {
    out.feedback.push_back({FeedbackKind::Audio, std::nullopt, std::nullopt, "reject"});
    out.scene = std::move(scene);
    out.mode = std::move(mode);
    return out;
  }
  Reducer(scene, mode, event, config, out).run();
  out.scene = std::move(scene);
  out.mode = std::move(mode);
  return out;
}

}  // namespace maglens
