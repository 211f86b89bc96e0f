#include "nams/harness/counter.hpp"

namespace nams::harness {

std::string to_string(Phase p) {
  switch (p) {
    case Phase::NamsTrain:
      return "nams_train";
    case Phase::NamsInfer:
      return "nams_infer";
    case Phase::DrTrain:
      return "dr_train";
    case Phase::DrInfer:
      return "dr_infer";
    case Phase::Ms2Search:
      return "ms2_search";
    case Phase::Downstream:
      return "downstream";
  }
  return "unknown";
}

std::uint64_t SimCallCounter::total() const {
  std::uint64_t t = 0;
  for (const auto& c : counts_) t += c.load();
  return t;
}

nlohmann::json SimCallCounter::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < kPhaseCount; ++i) j[to_string(static_cast<Phase>(i))] = counts_[i].load();
  return j;
}

}  // namespace nams::harness
