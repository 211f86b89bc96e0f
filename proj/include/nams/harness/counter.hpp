#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <string>

#include "json.hpp"

namespace nams::harness {

enum class Phase { NamsTrain, NamsInfer, DrTrain, DrInfer, Ms2Search, Downstream };
inline constexpr std::size_t kPhaseCount = 6;

std::string to_string(Phase p);

/// Simulator invocations per pipeline phase. Simulators are bound to a slot
/// with Simulator::set_counter(counter.slot(phase)).
class SimCallCounter {
 public:
  std::atomic<std::uint64_t>* slot(Phase p) { return &counts_[static_cast<std::size_t>(p)]; }
  std::uint64_t get(Phase p) const { return counts_[static_cast<std::size_t>(p)].load(); }
  std::uint64_t total() const;
  nlohmann::json to_json() const;

 private:
  std::array<std::atomic<std::uint64_t>, kPhaseCount> counts_{};
};

}  // namespace nams::harness
