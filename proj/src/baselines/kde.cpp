#include "nams/baselines/kde.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nams/common/error.hpp"

namespace nams::baselines {

double kde_log_density(std::span<const Point> samples, std::span<const double> x, double h) {
  if (samples.empty()) throw InvalidArgument("kde_log_density: no samples");
  if (!(h > 0.0)) throw InvalidArgument("kde_log_density: bandwidth must be positive");
  const std::size_t d = x.size();
  std::vector<double> logk(samples.size());
  const double inv_2h2 = 1.0 / (2.0 * h * h);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != d) throw InvalidArgument("kde_log_density: dimension mismatch");
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += (x[j] - samples[i][j]) * (x[j] - samples[i][j]);
    logk[i] = -sq * inv_2h2;
  }
  const double top = *std::max_element(logk.begin(), logk.end());
  double acc = 0.0;
  for (double v : logk) acc += std::exp(v - top);
  const double log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * h * h);
  return top + std::log(acc) - std::log(static_cast<double>(samples.size())) + log_norm;
}

double silverman_bandwidth(std::span<const Point> samples) {
  if (samples.size() < 2) throw InvalidArgument("silverman_bandwidth: need at least two samples");
  const std::size_t d = samples.front().size();
  const double n = static_cast<double>(samples.size());
  double mean_std = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (const auto& s : samples) m += s[j];
    m /= n;
    double v = 0.0;
    for (const auto& s : samples) v += (s[j] - m) * (s[j] - m);
    mean_std += std::sqrt(v / (n - 1.0));
  }
  mean_std /= static_cast<double>(d);
  double h = mean_std * std::pow(4.0 / ((static_cast<double>(d) + 2.0) * n), 1.0 / (static_cast<double>(d) + 4.0));
  // Degenerate corpora (all points equal) still need a usable kernel.
  return std::max(h, 1e-3);
}

Pca Pca::fit(std::span<const Point> data, std::size_t components) {
  if (data.size() < 2) throw InvalidArgument("Pca::fit: need at least two rows");
  const std::size_t d = data.front().size();
  if (components == 0 || components > d) throw InvalidArgument("Pca::fit: bad component count");
  Pca p;
  p.mean_.assign(d, 0.0);
  for (const auto& row : data) {
    if (row.size() != d) throw InvalidArgument("Pca::fit: ragged data");
    for (std::size_t j = 0; j < d; ++j) p.mean_[j] += row[j];
  }
  for (auto& m : p.mean_) m /= static_cast<double>(data.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Eigen::VectorXd centered(static_cast<Eigen::Index>(d));
  for (const auto& row : data) {
    for (std::size_t j = 0; j < d; ++j) centered[static_cast<Eigen::Index>(j)] = row[j] - p.mean_[j];
    cov.noalias() += centered * centered.transpose();
  }
  cov /= static_cast<double>(data.size() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericalError("Pca::fit: eigendecomposition failed");
  // Eigenvalues come back ascending.
  for (std::size_t c = 0; c < components; ++c) {
    const Eigen::Index col = static_cast<Eigen::Index>(d - 1 - c);
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    p.basis_.emplace_back(v.data(), v.data() + v.size());
    p.variance_.push_back(std::max(0.0, solver.eigenvalues()[col]));
  }
  return p;
}

Point Pca::project(std::span<const double> x) const {
  if (x.size() != mean_.size()) throw InvalidArgument("Pca::project: dimension mismatch");
  Point out(basis_.size(), 0.0);
  for (std::size_t c = 0; c < basis_.size(); ++c)
    for (std::size_t j = 0; j < x.size(); ++j) out[c] += basis_[c][j] * (x[j] - mean_[j]);
  return out;
}

nlohmann::json Pca::to_json() const { return {{"mean", mean_}, {"basis", basis_}, {"variance", variance_}}; }

Pca Pca::from_json(const nlohmann::json& j) {
  Pca p;
  try {
    p.mean_ = j.at("mean").get<std::vector<double>>();
    p.basis_ = j.at("basis").get<std::vector<std::vector<double>>>();
    p.variance_ = j.at("variance").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("pca: ") + e.what());
  }
  for (const auto& b : p.basis_)
    if (b.size() != p.mean_.size()) throw ConfigError("pca: basis dimension mismatch");
  return p;
}

FeatureProjection FeatureProjection::from_json(const nlohmann::json& j) {
  return {features::FeatureScaler::from_json(j.at("scaler")), Pca::from_json(j.at("pca"))};
}

}  // namespace nams::baselines
