#include "nams/autodiff/parameters.hpp"

#include <fstream>

#include "nams/common/error.hpp"

namespace nams::ad {

Tensor& ModelParameters::add(const std::string& name, Tensor value, bool trainable) {
  if (index_.count(name)) throw InvalidArgument("ModelParameters: duplicate entry '" + name + "'");
  ParameterEntry e;
  e.name = name;
  e.first_moment = Tensor(value.shape(), 0.0);
  e.second_moment = Tensor(value.shape(), 0.0);
  e.value = std::move(value);
  e.trainable = trainable;
  index_[name] = entries_.size();
  entries_.push_back(std::move(e));
  return entries_.back().value;
}

bool ModelParameters::contains(const std::string& name) const { return index_.count(name) > 0; }

const ParameterEntry& ModelParameters::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("ModelParameters: no entry '" + name + "'");
  return entries_[it->second];
}

ParameterEntry& ModelParameters::entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("ModelParameters: no entry '" + name + "'");
  return entries_[it->second];
}

const Tensor& ModelParameters::get(const std::string& name) const { return entry(name).value; }
Tensor& ModelParameters::get(const std::string& name) { return entry(name).value; }

ParameterGrads ModelParameters::zero_grads() const {
  ParameterGrads grads;
  for (const auto& e : entries_) {
    if (e.trainable) grads.emplace(e.name, Tensor(e.value.shape(), 0.0));
  }
  return grads;
}

nlohmann::json ModelParameters::to_json() const {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : entries_) {
    entries.push_back({{"name", e.name},
                       {"shape", e.value.shape()},
                       {"trainable", e.trainable},
                       {"data", e.value.values()}});
  }
  return {{"format", "nams-parameters"}, {"format_version", kFormatVersion}, {"entries", entries}};
}

ModelParameters ModelParameters::from_json(const nlohmann::json& j) {
  if (!j.contains("format_version") || j.at("format_version").get<int>() != kFormatVersion) {
    throw ConfigError("parameter file: unsupported or missing format_version");
  }
  ModelParameters params;
  for (const auto& e : j.at("entries")) {
    auto shape = e.at("shape").get<std::vector<std::size_t>>();
    auto data = e.at("data").get<std::vector<double>>();
    params.add(e.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data)),
               e.value("trainable", true));
  }
  return params;
}

void ModelParameters::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

ModelParameters ModelParameters::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace nams::ad
