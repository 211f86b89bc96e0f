#include "nams/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "nams/common/error.hpp"

namespace nams::ad {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

constexpr double kClamp = 1e-7;

ConstMatrixMap view(const Tensor& t) {
  return ConstMatrixMap(t.values().data(), static_cast<Eigen::Index>(t.rows()),
                        static_cast<Eigen::Index>(t.cols()));
}

MatrixMap view(Tensor& t) {
  return MatrixMap(t.values().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void require_rank2(const Graph& g, NodeId id, const std::string& op) {
  if (g.value(id).rank() != 2) {
    throw InvalidArgument(op + ": input '" + g.op(id) + "' must be rank 2, got " + g.value(id).shape_string());
  }
}

void require_same_shape(const Graph& g, NodeId a, NodeId b, const std::string& op) {
  if (!g.value(a).same_shape(g.value(b))) {
    throw InvalidArgument(op + ": shape mismatch between '" + g.op(a) + "' " + g.value(a).shape_string() +
                          " and '" + g.op(b) + "' " + g.value(b).shape_string());
  }
}

template <typename Forward, typename Derivative>
NodeId unary(Graph& g, NodeId x, const std::string& op, Forward f, Derivative df) {
  const Tensor& in = g.value(x);
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return g.record(op, std::move(out), {x}, [x, df](Graph& gr, NodeId self) {
    const Tensor& in = gr.value(x);
    const Tensor& y = gr.value(self);
    const Tensor& gy = gr.grad(self);
    Tensor gx(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) gx[i] = gy[i] * df(in[i], y[i]);
    gr.accumulate(x, gx);
  });
}

NodeId scalar_node(Graph& g, const std::string& op, double value, std::vector<NodeId> inputs,
                   Graph::BackwardFn backward) {
  return g.record(op, Tensor::scalar(value), std::move(inputs), std::move(backward));
}

}  // namespace

NodeId affine(Graph& g, NodeId x, NodeId w, NodeId b, const std::string& label) {
  require_rank2(g, x, label);
  require_rank2(g, w, label);
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(w);
  const Tensor& bv = g.value(b);
  if (xv.cols() != wv.rows()) {
    throw InvalidArgument(label + ": input '" + g.op(x) + "' has " + std::to_string(xv.cols()) +
                          " columns but weight '" + g.op(w) + "' expects " + std::to_string(wv.rows()));
  }
  if (bv.size() != wv.cols()) {
    throw InvalidArgument(label + ": bias '" + g.op(b) + "' has " + std::to_string(bv.size()) +
                          " entries, expected " + std::to_string(wv.cols()));
  }
  Tensor out = Tensor::matrix(xv.rows(), wv.cols());
  auto o = view(out);
  o.noalias() = view(xv) * view(wv);
  Eigen::Map<const Eigen::RowVectorXd> bias(bv.values().data(), static_cast<Eigen::Index>(bv.size()));
  o.rowwise() += bias;
  return g.record(label, std::move(out), {x, w, b}, [x, w, b](Graph& gr, NodeId self) {
    const Tensor& gy = gr.grad(self);
    auto gyv = view(gy);
    if (gr.requires_grad(x)) {
      Tensor& gx = gr.grad_buffer(x);
      view(gx).noalias() += gyv * view(gr.value(w)).transpose();
    }
    if (gr.requires_grad(w)) {
      Tensor& gw = gr.grad_buffer(w);
      view(gw).noalias() += view(gr.value(x)).transpose() * gyv;
    }
    if (gr.requires_grad(b)) {
      Tensor& gb = gr.grad_buffer(b);
      Eigen::Map<Eigen::RowVectorXd> gbv(gb.values().data(), static_cast<Eigen::Index>(gb.size()));
      gbv += gyv.colwise().sum();
    }
  });
}

NodeId leaky_relu(Graph& g, NodeId x, double slope) {
  return unary(
      g, x, "leaky_relu", [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

NodeId relu(Graph& g, NodeId x) {
  return unary(
      g, x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

NodeId sigmoid(Graph& g, NodeId x) {
  return unary(
      g, x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

NodeId exp(Graph& g, NodeId x) {
  return unary(
      g, x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

NodeId add(Graph& g, NodeId a, NodeId b) {
  require_same_shape(g, a, b, "add");
  Tensor out = g.value(a);
  const Tensor& bv = g.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return g.record("add", std::move(out), {a, b}, [a, b](Graph& gr, NodeId self) {
    gr.accumulate(a, gr.grad(self));
    gr.accumulate(b, gr.grad(self));
  });
}

NodeId sub(Graph& g, NodeId a, NodeId b) {
  require_same_shape(g, a, b, "sub");
  Tensor out = g.value(a);
  const Tensor& bv = g.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return g.record("sub", std::move(out), {a, b}, [a, b](Graph& gr, NodeId self) {
    gr.accumulate(a, gr.grad(self));
    if (gr.requires_grad(b)) {
      Tensor neg = gr.grad(self);
      for (auto& v : neg.values()) v = -v;
      gr.accumulate(b, neg);
    }
  });
}

NodeId mul(Graph& g, NodeId a, NodeId b) {
  require_same_shape(g, a, b, "mul");
  Tensor out = g.value(a);
  const Tensor& bv = g.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return g.record("mul", std::move(out), {a, b}, [a, b](Graph& gr, NodeId self) {
    const Tensor& gy = gr.grad(self);
    if (gr.requires_grad(a)) {
      Tensor ga = gy;
      const Tensor& bv = gr.value(b);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= bv[i];
      gr.accumulate(a, ga);
    }
    if (gr.requires_grad(b)) {
      Tensor gb = gy;
      const Tensor& av = gr.value(a);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= av[i];
      gr.accumulate(b, gb);
    }
  });
}

NodeId scale(Graph& g, NodeId x, double factor) {
  return unary(
      g, x, "scale", [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

NodeId concat(Graph& g, const std::vector<NodeId>& parts) {
  if (parts.empty()) throw InvalidArgument("concat: no inputs");
  std::size_t rows = 0;
  std::size_t cols = 0;
  for (NodeId p : parts) {
    require_rank2(g, p, "concat");
    if (p == parts.front()) rows = g.value(p).rows();
    if (g.value(p).rows() != rows) {
      throw InvalidArgument("concat: input '" + g.op(p) + "' has " + std::to_string(g.value(p).rows()) +
                            " rows, expected " + std::to_string(rows));
    }
    cols += g.value(p).cols();
  }
  Tensor out = Tensor::matrix(rows, cols);
  std::size_t offset = 0;
  for (NodeId p : parts) {
    const Tensor& pv = g.value(p);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.values().begin() + static_cast<std::ptrdiff_t>(r * pv.cols()), pv.cols(),
                  out.values().begin() + static_cast<std::ptrdiff_t>(r * cols + offset));
    }
    offset += pv.cols();
  }
  return g.record("concat", std::move(out), parts, [parts](Graph& gr, NodeId self) {
    const Tensor& gy = gr.grad(self);
    std::size_t off = 0;
    for (NodeId p : parts) {
      const Tensor& pv = gr.value(p);
      if (gr.requires_grad(p)) {
        Tensor gp(pv.shape());
        for (std::size_t r = 0; r < pv.rows(); ++r)
          for (std::size_t c = 0; c < pv.cols(); ++c) gp(r, c) = gy(r, off + c);
        gr.accumulate(p, gp);
      }
      off += pv.cols();
    }
  });
}

NodeId slice_cols(Graph& g, NodeId x, std::size_t begin, std::size_t end) {
  require_rank2(g, x, "slice_cols");
  const Tensor& xv = g.value(x);
  if (begin > end || end > xv.cols()) {
    throw InvalidArgument("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                          ") out of bounds for '" + g.op(x) + "' " + xv.shape_string());
  }
  Tensor out = Tensor::matrix(xv.rows(), end - begin);
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = xv(r, c);
  return g.record("slice_cols", std::move(out), {x}, [x, begin](Graph& gr, NodeId self) {
    const Tensor& gy = gr.grad(self);
    Tensor& gx = gr.grad_buffer(x);
    for (std::size_t r = 0; r < gy.rows(); ++r)
      for (std::size_t c = 0; c < gy.cols(); ++c) gx(r, begin + c) += gy(r, c);
  });
}

std::pair<NodeId, NodeId> split(Graph& g, NodeId x, std::size_t at) {
  NodeId left = slice_cols(g, x, 0, at);
  NodeId right = slice_cols(g, x, at, g.value(x).cols());
  return {left, right};
}

NodeId sum(Graph& g, NodeId x) {
  double total = 0.0;
  for (double v : g.value(x).values()) total += v;
  return scalar_node(g, "sum", total, {x}, [x](Graph& gr, NodeId self) {
    Tensor gx(gr.value(x).shape(), gr.grad(self).item());
    gr.accumulate(x, gx);
  });
}

NodeId sum_squares(Graph& g, NodeId x) {
  double total = 0.0;
  for (double v : g.value(x).values()) total += v * v;
  return scalar_node(g, "sum_squares", total, {x}, [x](Graph& gr, NodeId self) {
    Tensor gx = gr.value(x);
    double s = 2.0 * gr.grad(self).item();
    for (auto& v : gx.values()) v *= s;
    gr.accumulate(x, gx);
  });
}

NodeId batchnorm(Graph& g, NodeId x, NodeId gamma, NodeId beta, const BatchNormOptions& options,
                 Tensor* running_mean, Tensor* running_var, const std::string& label) {
  require_rank2(g, x, label);
  const Tensor& xv = g.value(x);
  const std::size_t batch = xv.rows();
  const std::size_t features = xv.cols();
  if (g.value(gamma).size() != features || g.value(beta).size() != features) {
    throw InvalidArgument(label + ": gamma/beta size does not match " + std::to_string(features) + " features");
  }
  const Tensor& gv = g.value(gamma);
  const Tensor& bv = g.value(beta);

  if (options.mode == Mode::Eval) {
    if (!running_mean || !running_var) throw InvalidArgument(label + ": eval mode needs running statistics");
    std::vector<double> inv_std(features);
    for (std::size_t c = 0; c < features; ++c) inv_std[c] = 1.0 / std::sqrt((*running_var)[c] + options.epsilon);
    std::vector<double> mean = running_mean->to_vector();
    Tensor out(xv.shape());
    for (std::size_t r = 0; r < batch; ++r)
      for (std::size_t c = 0; c < features; ++c) out(r, c) = gv[c] * (xv(r, c) - mean[c]) * inv_std[c] + bv[c];
    return g.record(label, std::move(out), {x, gamma, beta},
                    [x, gamma, beta, inv_std, mean](Graph& gr, NodeId self) {
                      const Tensor& gy = gr.grad(self);
                      const Tensor& xin = gr.value(x);
                      const Tensor& gam = gr.value(gamma);
                      std::size_t nf = xin.cols();
                      if (gr.requires_grad(x)) {
                        Tensor& gx = gr.grad_buffer(x);
                        for (std::size_t r = 0; r < xin.rows(); ++r)
                          for (std::size_t c = 0; c < nf; ++c) gx(r, c) += gy(r, c) * gam[c] * inv_std[c];
                      }
                      if (gr.requires_grad(gamma) || gr.requires_grad(beta)) {
                        Tensor ggam(gr.value(gamma).shape());
                        Tensor gbet(gr.value(beta).shape());
                        for (std::size_t r = 0; r < xin.rows(); ++r)
                          for (std::size_t c = 0; c < nf; ++c) {
                            ggam[c] += gy(r, c) * (xin(r, c) - mean[c]) * inv_std[c];
                            gbet[c] += gy(r, c);
                          }
                        gr.accumulate(gamma, ggam);
                        gr.accumulate(beta, gbet);
                      }
                    });
  }

  if (batch < 2) {
    throw InvalidArgument(label + ": train-mode batchnorm needs at least 2 rows (variance undefined), got " +
                          std::to_string(batch));
  }
  std::vector<double> mean(features, 0.0);
  std::vector<double> var(features, 0.0);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t c = 0; c < features; ++c) mean[c] += xv(r, c);
  for (auto& m : mean) m /= static_cast<double>(batch);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t c = 0; c < features; ++c) {
      double d = xv(r, c) - mean[c];
      var[c] += d * d;
    }
  for (auto& v : var) v /= static_cast<double>(batch);

  if (running_mean && running_var) {
    const double m = options.momentum;
    const double unbias = static_cast<double>(batch) / static_cast<double>(batch - 1);
    for (std::size_t c = 0; c < features; ++c) {
      (*running_mean)[c] = (1.0 - m) * (*running_mean)[c] + m * mean[c];
      (*running_var)[c] = (1.0 - m) * (*running_var)[c] + m * var[c] * unbias;
    }
  }

  std::vector<double> inv_std(features);
  for (std::size_t c = 0; c < features; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + options.epsilon);
  Tensor xhat(xv.shape());
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t c = 0; c < features; ++c) {
      xhat(r, c) = (xv(r, c) - mean[c]) * inv_std[c];
      out(r, c) = gv[c] * xhat(r, c) + bv[c];
    }
  return g.record(
      label, std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& gr, NodeId self) {
        const Tensor& gy = gr.grad(self);
        const Tensor& gam = gr.value(gamma);
        const std::size_t n = gy.rows();
        const std::size_t nf = gy.cols();
        std::vector<double> sum_dy(nf, 0.0);
        std::vector<double> sum_dy_xhat(nf, 0.0);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < nf; ++c) {
            sum_dy[c] += gy(r, c);
            sum_dy_xhat[c] += gy(r, c) * xhat(r, c);
          }
        if (gr.requires_grad(x)) {
          Tensor& gx = gr.grad_buffer(x);
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < nf; ++c) {
              double dxhat_sum = gam[c] * sum_dy[c];
              double dxhat_xhat = gam[c] * sum_dy_xhat[c];
              double dxhat = gy(r, c) * gam[c];
              gx(r, c) += inv_std[c] * inv_n *
                          (static_cast<double>(n) * dxhat - dxhat_sum - xhat(r, c) * dxhat_xhat);
            }
        }
        gr.accumulate(gamma, Tensor(gam.shape(), sum_dy_xhat));
        gr.accumulate(beta, Tensor(gr.value(beta).shape(), sum_dy));
      });
}

NodeId dropout(Graph& g, NodeId x, double rate, Mode mode, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw InvalidArgument("dropout: rate must be in [0, 1)");
  if (mode == Mode::Eval || rate == 0.0) return x;
  const Tensor& xv = g.value(x);
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(xv.shape());
  for (auto& m : mask.values()) m = rng.bernoulli(1.0 - rate) ? keep_scale : 0.0;
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return g.record("dropout", std::move(out), {x}, [x, mask = std::move(mask)](Graph& gr, NodeId self) {
    Tensor gx = gr.grad(self);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= mask[i];
    gr.accumulate(x, gx);
  });
}

NodeId mse(Graph& g, NodeId pred, NodeId target) {
  require_same_shape(g, pred, target, "mse");
  const Tensor& p = g.value(pred);
  const Tensor& t = g.value(target);
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] - t[i]) * (p[i] - t[i]);
  const double n = static_cast<double>(p.size());
  return scalar_node(g, "mse", total / n, {pred, target}, [pred, target, n](Graph& gr, NodeId self) {
    const Tensor& p = gr.value(pred);
    const Tensor& t = gr.value(target);
    double s = 2.0 * gr.grad(self).item() / n;
    Tensor gp(p.shape());
    for (std::size_t i = 0; i < p.size(); ++i) gp[i] = s * (p[i] - t[i]);
    gr.accumulate(pred, gp);
    if (gr.requires_grad(target)) {
      for (auto& v : gp.values()) v = -v;
      gr.accumulate(target, gp);
    }
  });
}

NodeId sse(Graph& g, NodeId pred, NodeId target) {
  require_same_shape(g, pred, target, "sse");
  const Tensor& p = g.value(pred);
  const Tensor& t = g.value(target);
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] - t[i]) * (p[i] - t[i]);
  return scalar_node(g, "sse", total, {pred, target}, [pred, target](Graph& gr, NodeId self) {
    const Tensor& p = gr.value(pred);
    const Tensor& t = gr.value(target);
    double s = 2.0 * gr.grad(self).item();
    Tensor gp(p.shape());
    for (std::size_t i = 0; i < p.size(); ++i) gp[i] = s * (p[i] - t[i]);
    gr.accumulate(pred, gp);
    if (gr.requires_grad(target)) {
      for (auto& v : gp.values()) v = -v;
      gr.accumulate(target, gp);
    }
  });
}

NodeId bce(Graph& g, NodeId pred, NodeId target) {
  require_same_shape(g, pred, target, "bce");
  const Tensor& p = g.value(pred);
  const Tensor& t = g.value(target);
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double pc = std::clamp(p[i], kClamp, 1.0 - kClamp);
    total -= t[i] * std::log(pc) + (1.0 - t[i]) * std::log(1.0 - pc);
  }
  const double n = static_cast<double>(p.size());
  return scalar_node(g, "bce", total / n, {pred, target}, [pred, target, n](Graph& gr, NodeId self) {
    const Tensor& p = gr.value(pred);
    const Tensor& t = gr.value(target);
    double s = gr.grad(self).item() / n;
    if (gr.requires_grad(pred)) {
      Tensor gp(p.shape());
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= kClamp || p[i] >= 1.0 - kClamp) continue;
        gp[i] = s * (p[i] - t[i]) / (p[i] * (1.0 - p[i]));
      }
      gr.accumulate(pred, gp);
    }
    if (gr.requires_grad(target)) {
      Tensor gt(t.shape());
      for (std::size_t i = 0; i < t.size(); ++i) {
        double pc = std::clamp(p[i], kClamp, 1.0 - kClamp);
        gt[i] = -s * (std::log(pc) - std::log(1.0 - pc));
      }
      gr.accumulate(target, gt);
    }
  });
}

NodeId kl_gaussian(Graph& g, NodeId mu, NodeId sigma) {
  require_same_shape(g, mu, sigma, "kl_gaussian");
  require_rank2(g, mu, "kl_gaussian");
  const Tensor& m = g.value(mu);
  const Tensor& s = g.value(sigma);
  double total = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!(s[i] > 0.0)) throw NumericalError("kl_gaussian: sigma must be positive");
    total += 0.5 * (m[i] * m[i] + s[i] * s[i] - 1.0 - 2.0 * std::log(s[i]));
  }
  const double rows = static_cast<double>(m.rows());
  return scalar_node(g, "kl_gaussian", total / rows, {mu, sigma}, [mu, sigma, rows](Graph& gr, NodeId self) {
    const Tensor& m = gr.value(mu);
    const Tensor& s = gr.value(sigma);
    double k = gr.grad(self).item() / rows;
    if (gr.requires_grad(mu)) {
      Tensor gm = m;
      for (auto& v : gm.values()) v *= k;
      gr.accumulate(mu, gm);
    }
    if (gr.requires_grad(sigma)) {
      Tensor gs(s.shape());
      for (std::size_t i = 0; i < s.size(); ++i) gs[i] = k * (s[i] - 1.0 / s[i]);
      gr.accumulate(sigma, gs);
    }
  });
}

}  // namespace nams::ad
