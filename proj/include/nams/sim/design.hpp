#pragma once

#include <compare>
#include <span>
#include <vector>

#include "nams/common/rng.hpp"

namespace nams::sim {

enum class Family { Flat, Sloped };

/// Size of the categorical design space: one texture per roof family.
struct DesignSpace {
  int flat_count = 16;
  int sloped_count = 16;

  int dim() const { return flat_count + sloped_count; }
  int joint_count() const { return flat_count * sloped_count; }
  int count(Family f) const { return f == Family::Flat ? flat_count : sloped_count; }
};

/// A pair of texture indices; the compact form of a discrete design.
struct DiscreteDesign {
  int flat = 0;
  int sloped = 0;

  int get(Family f) const { return f == Family::Flat ? flat : sloped; }
  auto operator<=>(const DiscreteDesign&) const = default;
};

/// Concatenated per-family selection vectors. Discrete designs are one-hot
/// per family; relaxed designs (decoder outputs) lie in [0,1].
class DesignVector {
 public:
  DesignVector() = default;
  DesignVector(std::vector<double> flat, std::vector<double> sloped);

  static DesignVector one_hot(const DiscreteDesign& d, const DesignSpace& space);
  /// Splits a concatenated [flat | sloped] vector.
  static DesignVector from_concatenated(std::span<const double> values, const DesignSpace& space);

  const std::vector<double>& flat() const { return flat_; }
  const std::vector<double>& sloped() const { return sloped_; }
  std::vector<double> concatenated() const;
  DesignSpace space() const;

  /// Exactly one entry equal to 1 per family, all others 0.
  bool is_discrete() const;
  /// Throws InvalidArgument when the vector is not discrete.
  DiscreteDesign to_discrete() const;
  /// Per-family argmax (lowest index on ties); valid for relaxed designs.
  DiscreteDesign argmax() const;

 private:
  std::vector<double> flat_;
  std::vector<double> sloped_;
};

DiscreteDesign sample_uniform_discrete(const DesignSpace& space, Rng& rng);
DesignVector sample_uniform_design(const DesignSpace& space, Rng& rng);

/// Index of the largest entry; the first one wins ties.
int argmax_index(std::span<const double> values);

}  // namespace nams::sim
