#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "nams/autodiff/tensor.hpp"

namespace nams::ad {

/// One named tensor plus its ADAM moments.
struct ParameterEntry {
  std::string name;
  Tensor value;
  /// Non-trainable entries hold buffers such as batchnorm running statistics.
  bool trainable = true;
  Tensor first_moment;
  Tensor second_moment;
  std::uint64_t step = 0;
};

using ParameterGrads = std::map<std::string, Tensor>;

/// Named collection of weights, biases and buffers for one or more networks.
class ModelParameters {
 public:
  static constexpr int kFormatVersion = 1;

  /// Adds a new entry. Throws if the name is taken.
  Tensor& add(const std::string& name, Tensor value, bool trainable = true);

  bool contains(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  const ParameterEntry& entry(const std::string& name) const;
  ParameterEntry& entry(const std::string& name);

  std::vector<ParameterEntry>& entries() { return entries_; }
  const std::vector<ParameterEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Zero-filled gradients for every trainable entry.
  ParameterGrads zero_grads() const;

  nlohmann::json to_json() const;
  static ModelParameters from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static ModelParameters load(const std::filesystem::path& path);

 private:
  std::vector<ParameterEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace nams::ad
