#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace maglens {

enum class FieldTransform { GradientMagnitude };
enum class Integrator { EmissionAbsorption, MaximumIntensity };

using ParamMap = std::map<std::string, double, std::less<>>;

class EffectError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParamSpec {
  std::string_view name;
  double default_value;
  double min;
  double max;
};

// Parameters a descriptor may carry, transform's first, then integrator's.
std::vector<ParamSpec> param_schema(std::optional<FieldTransform> transform,
                                    std::optional<Integrator> integrator);

// A (field transform, integrator) pair plus parameters. At least one of the
// two is present and every parameter belongs to the pair's schema.
class EffectDescriptor {
 public:
  // Throws EffectError when the invariants do not hold.
  EffectDescriptor(std::optional<FieldTransform> transform, std::optional<Integrator> integrator,
                   ParamMap params = {});

  const std::optional<FieldTransform>& transform() const { return transform_; }
  const std::optional<Integrator>& integrator() const { return integrator_; }
  const ParamMap& params() const { return params_; }
  std::vector<ParamSpec> schema() const { return param_schema(transform_, integrator_); }

  // Value of `name`, falling back to the schema default.
  double param(std::string_view name) const;
  // Adds delta to a schema parameter, clamped to its range. Throws for keys
  // outside the schema.
  EffectDescriptor adjusted(std::string_view name, double delta) const;

  // Compact token, e.g. "grad/-", "-/mip", "-/ea;opacity_scale=4".
  std::string to_token() const;
  static EffectDescriptor parse(std::string_view token);

  bool operator==(const EffectDescriptor&) const = default;

 private:
  std::optional<FieldTransform> transform_;
  std::optional<Integrator> integrator_;
  ParamMap params_;
};

struct EffectTemplate {
  std::string name;
  EffectDescriptor descriptor;
};

// Ordered, flat list offered by the toolbox menu.
const std::vector<EffectTemplate>& effect_registry();
std::optional<std::size_t> registry_index(const EffectDescriptor& d);
// Registry name when the descriptor matches a template exactly, else its token.
std::string effect_label(const EffectDescriptor& d);
// Accepts a registry name or a descriptor token.
EffectDescriptor effect_from_label(std::string_view label);

// Stack of descriptors collapsed into what the integrator needs.
struct EffectiveShading {
  std::vector<FieldTransform> transforms;  // applied innermost-first
  Integrator integrator = Integrator::EmissionAbsorption;
  ParamMap params;

  double param(std::string_view name, double fallback) const;
  bool operator==(const EffectiveShading&) const = default;
};

EffectiveShading compose_effects(std::span<const EffectDescriptor> stack);

}  // namespace maglens
