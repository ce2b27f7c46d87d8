#include "maglens/effects.hpp"

#include "maglens/record.hpp"

#include <algorithm>

namespace maglens {

namespace {

constexpr ParamSpec kGradientScale{"gradient_scale", 1.0, 0.25, 8.0};
constexpr ParamSpec kOpacityScale{"opacity_scale", 1.0, 0.25, 8.0};
constexpr ParamSpec kIntensityGain{"intensity_gain", 1.0, 0.25, 8.0};

}  // namespace

std::vector<ParamSpec> param_schema(std::optional<FieldTransform> transform,
                                    std::optional<Integrator> integrator) {
  std::vector<ParamSpec> out;
  if (transform == FieldTransform::GradientMagnitude) out.push_back(kGradientScale);
  if (integrator == Integrator::EmissionAbsorption) out.push_back(kOpacityScale);
  if (integrator == Integrator::MaximumIntensity) out.push_back(kIntensityGain);
  return out;
}

EffectDescriptor::EffectDescriptor(std::optional<FieldTransform> transform,
                                   std::optional<Integrator> integrator, ParamMap params)
    : transform_(transform), integrator_(integrator), params_(std::move(params)) {
  if (!transform_ && !integrator_) {
    throw EffectError("effect needs a field transform, an integrator, or both");
  }
  const auto schema = param_schema(transform_, integrator_);
  for (const auto& [key, value] : params_) {
    auto it = std::find_if(schema.begin(), schema.end(),
                           [&](const ParamSpec& s) { return s.name == key; });
    if (it == schema.end()) throw EffectError("parameter '" + key + "' is not valid for this effect");
    if (!(value >= it->min && value <= it->max)) {
      throw EffectError("parameter '" + key + "' out of range");
    }
  }
}

double EffectDescriptor::param(std::string_view name) const {
  if (auto it = params_.find(name); it != params_.end()) return it->second;
  for (const auto& s : schema()) {
    if (s.name == name) return s.default_value;
  }
  throw EffectError("unknown parameter '" + std::string(name) + "'");
}

EffectDescriptor EffectDescriptor::adjusted(std::string_view name, double delta) const {
  for (const auto& s : schema()) {
    if (s.name != name) continue;
    ParamMap next = params_;
    next[std::string(name)] = std::clamp(param(name) + delta, s.min, s.max);
    return EffectDescriptor(transform_, integrator_, std::move(next));
  }
  throw EffectError("unknown parameter '" + std::string(name) + "'");
}

std::string EffectDescriptor::to_token() const {
  std::string out = transform_ ? "grad" : "-";
  out += '/';
  if (!integrator_) {
    out += '-';
  } else {
    out += *integrator_ == Integrator::EmissionAbsorption ? "ea" : "mip";
  }
  for (const auto& [k, v] : params_) {
    out += ';';
    out += k;
    out += '=';
    out += format_number(v);
  }
  return out;
}

EffectDescriptor EffectDescriptor::parse(std::string_view token) {
  const auto slash = token.find('/');
  if (slash == std::string_view::npos) throw EffectError("bad effect token '" + std::string(token) + "'");
  const auto semi = token.find(';');
  const std::string_view t = token.substr(0, slash);
  const std::string_view i = token.substr(slash + 1, semi == std::string_view::npos ? semi : semi - slash - 1);

  std::optional<FieldTransform> transform;
  if (t == "grad") {
    transform = FieldTransform::GradientMagnitude;
  } else if (t != "-") {
    throw EffectError("unknown field transform '" + std::string(t) + "'");
  }
  std::optional<Integrator> integrator;
  if (i == "ea") {
    integrator = Integrator::EmissionAbsorption;
  } else if (i == "mip") {
    integrator = Integrator::MaximumIntensity;
  } else if (i != "-") {
    throw EffectError("unknown integrator '" + std::string(i) + "'");
  }

  ParamMap params;
  std::size_t pos = semi;
  while (pos != std::string_view::npos) {
    const auto next = token.find(';', pos + 1);
    const auto item = token.substr(pos + 1, next == std::string_view::npos ? next : next - pos - 1);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw EffectError("bad effect parameter '" + std::string(item) + "'");
    try {
      params[std::string(item.substr(0, eq))] = parse_number(item.substr(eq + 1));
    } catch (const FormatError& e) {
      throw EffectError(e.what());
    }
    pos = next;
  }
  return EffectDescriptor(transform, integrator, std::move(params));
}

const std::vector<EffectTemplate>& effect_registry() {
  static const std::vector<EffectTemplate> registry = {
      {"derivative", EffectDescriptor(FieldTransform::GradientMagnitude, std::nullopt)},
      {"mip", EffectDescriptor(std::nullopt, Integrator::MaximumIntensity)},
      {"dvr", EffectDescriptor(std::nullopt, Integrator::EmissionAbsorption)},
      {"dense", EffectDescriptor(std::nullopt, Integrator::EmissionAbsorption, {{"opacity_scale", 4.0}})},
      {"edge-mip", EffectDescriptor(FieldTransform::GradientMagnitude, Integrator::MaximumIntensity)},
      {"faint", EffectDescriptor(std::nullopt, Integrator::EmissionAbsorption, {{"opacity_scale", 0.25}})},
      {"bright-mip", EffectDescriptor(std::nullopt, Integrator::MaximumIntensity, {{"intensity_gain", 2.0}})},
  };
  return registry;
}

std::optional<std::size_t> registry_index(const EffectDescriptor& d) {
  const auto& reg = effect_registry();
  for (std::size_t i = 0; i < reg.size(); ++i) {
    if (reg[i].descriptor == d) return i;
  }
  return std::nullopt;
}

std::string effect_label(const EffectDescriptor& d) {
  if (auto i = registry_index(d)) return effect_registry()[*i].name;
  return d.to_token();
}

EffectDescriptor effect_from_label(std::string_view label) {
  for (const auto& t : effect_registry()) {
    if (t.name == label) return t.descriptor;
  }
  return EffectDescriptor::parse(label);
}

double EffectiveShading::param(std::string_view name, double fallback) const {
  if (auto it = params.find(name); it != params.end()) return it->second;
  return fallback;
}

EffectiveShading compose_effects(std::span<const EffectDescriptor> stack) {
  EffectiveShading out;
  for (const auto& d : stack) {
    if (d.transform()) out.transforms.push_back(*d.transform());
    if (d.integrator()) out.integrator = *d.integrator();
    for (const auto& [k, v] : d.params()) out.params[k] = v;
  }
  return out;
}

}  // namespace maglens
