#include "nams/sim/design.hpp"

#include <string>

#include "nams/common/error.hpp"

namespace nams::sim {
namespace {

bool is_one_hot(const std::vector<double>& v) {
  int ones = 0;
  for (double x : v) {
    if (x == 1.0) {
      ++ones;
    } else if (x != 0.0) {
      return false;
    }
  }
  return ones == 1;
}

}  // namespace

DesignVector::DesignVector(std::vector<double> flat, std::vector<double> sloped)
    : flat_(std::move(flat)), sloped_(std::move(sloped)) {
  if (flat_.empty() || sloped_.empty()) throw InvalidArgument("DesignVector: empty family");
}

DesignVector DesignVector::one_hot(const DiscreteDesign& d, const DesignSpace& space) {
  if (d.flat < 0 || d.flat >= space.flat_count || d.sloped < 0 || d.sloped >= space.sloped_count) {
    throw InvalidArgument("DesignVector::one_hot: design (" + std::to_string(d.flat) + "," +
                          std::to_string(d.sloped) + ") outside the design space");
  }
  std::vector<double> flat(static_cast<std::size_t>(space.flat_count), 0.0);
  std::vector<double> sloped(static_cast<std::size_t>(space.sloped_count), 0.0);
  flat[static_cast<std::size_t>(d.flat)] = 1.0;
  sloped[static_cast<std::size_t>(d.sloped)] = 1.0;
  return {std::move(flat), std::move(sloped)};
}

DesignVector DesignVector::from_concatenated(std::span<const double> values, const DesignSpace& space) {
  if (values.size() != static_cast<std::size_t>(space.dim())) {
    throw InvalidArgument("DesignVector: expected " + std::to_string(space.dim()) + " values, got " +
                          std::to_string(values.size()));
  }
  auto split = values.begin() + space.flat_count;
  return {std::vector<double>(values.begin(), split), std::vector<double>(split, values.end())};
}

std::vector<double> DesignVector::concatenated() const {
  std::vector<double> out(flat_);
  out.insert(out.end(), sloped_.begin(), sloped_.end());
  return out;
}

DesignSpace DesignVector::space() const {
  return {static_cast<int>(flat_.size()), static_cast<int>(sloped_.size())};
}

bool DesignVector::is_discrete() const { return is_one_hot(flat_) && is_one_hot(sloped_); }

DiscreteDesign DesignVector::to_discrete() const {
  if (!is_discrete()) throw InvalidArgument("DesignVector: relaxed design where a discrete one-hot design is required");
  return argmax();
}

DiscreteDesign DesignVector::argmax() const { return {argmax_index(flat_), argmax_index(sloped_)}; }

int argmax_index(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("argmax_index: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<int>(best);
}

DiscreteDesign sample_uniform_discrete(const DesignSpace& space, Rng& rng) {
  DiscreteDesign d;
  d.flat = static_cast<int>(rng.below(static_cast<std::uint32_t>(space.flat_count)));
  d.sloped = static_cast<int>(rng.below(static_cast<std::uint32_t>(space.sloped_count)));
  return d;
}

DesignVector sample_uniform_design(const DesignSpace& space, Rng& rng) {
  return DesignVector::one_hot(sample_uniform_discrete(space, rng), space);
}

}  // namespace nams::sim
