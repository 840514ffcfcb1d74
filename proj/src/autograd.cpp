#include "cmt/model/autograd.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "cmt/error.hpp"

namespace cmt::model {

namespace ops {

namespace {
constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Mat layer_norm(const Mat& x, const Param& gamma, const Param& beta, Mat* normalized, RowVec* inv_std) {
  const long n = x.rows(), d = x.cols();
  Mat xhat(n, d);
  RowVec istd(n);
  for (long i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    istd(i) = 1.0 / std::sqrt(var + kLnEps);
    xhat.row(i) = (x.row(i).array() - mean) * istd(i);
  }
  Mat y = (xhat.array().rowwise() * gamma.value.row(0).array()).rowwise() + beta.value.row(0).array();
  if (normalized) *normalized = std::move(xhat);
  if (inv_std) *inv_std = std::move(istd);
  return y;
}

Mat gelu(const Mat& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v))); });
}

double gelu_grad(double v) {
  const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
  return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
}

Mat attention(const Mat& q, const Mat& k, const Mat& v, int heads, long key_offset, std::vector<Mat>* probs) {
  const long n = q.rows(), m = k.rows(), d = q.cols();
  const long dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat out(n, d);
  if (probs) probs->assign(heads, Mat());
  for (int h = 0; h < heads; ++h) {
    Mat s = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
    for (long i = 0; i < n; ++i) {
      const long visible = std::min(m, key_offset + i + 1);
      const double mx = s.row(i).head(visible).maxCoeff();
      double z = 0.0;
      for (long j = 0; j < m; ++j) {
        const double e = j < visible ? std::exp(s(i, j) - mx) : 0.0;
        s(i, j) = e;
        z += e;
      }
      s.row(i) /= z;
    }
    out.middleCols(h * dh, dh) = s * v.middleCols(h * dh, dh);
    if (probs) (*probs)[h] = std::move(s);
  }
  return out;
}

Mat sinusoid(std::span<const int> positions, int d_model) {
  Mat out(static_cast<long>(positions.size()), d_model);
  for (std::size_t r = 0; r < positions.size(); ++r) {
    for (int n = 0; 2 * n < d_model; ++n) {
      const double angle = positions[r] / std::pow(10000.0, 2.0 * n / d_model);
      out(static_cast<long>(r), 2 * n) = std::sin(angle);
      if (2 * n + 1 < d_model) out(static_cast<long>(r), 2 * n + 1) = std::cos(angle);
    }
  }
  return out;
}

}  // namespace ops

Tape::Var Tape::push(Mat value, std::function<void()> backward) {
  nodes_.push_back({std::move(value), Mat(), std::move(backward)});
  return static_cast<Var>(nodes_.size() - 1);
}

Mat& Tape::grad(Var v) {
  Node& n = nodes_[v];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Tape::Var Tape::constant(Mat value) { return push(std::move(value)); }

Tape::Var Tape::gather(Param& table, std::span<const int> rows) {
  Mat out(static_cast<long>(rows.size()), table.value.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= table.value.rows()) throw InvalidArgument("embedding index out of range in " + table.name);
    out.row(static_cast<long>(r)) = table.value.row(rows[r]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  const Var self = static_cast<Var>(nodes_.size());
  return push(std::move(out), [this, self, &table, idx = std::move(idx)] {
    const Mat& g = nodes_[self].grad;
    for (std::size_t r = 0; r < idx.size(); ++r) table.grad.row(idx[r]) += g.row(static_cast<long>(r));
  });
}

Tape::Var Tape::linear(Var x, Param& weight, Param* bias) {
  Mat out = value(x) * weight.value;
  if (bias) out.rowwise() += bias->value.row(0);
  const Var self = static_cast<Var>(nodes_.size());
  return push(std::move(out), [this, self, x, &weight, bias] {
    const Mat& g = nodes_[self].grad;
    weight.grad.noalias() += value(x).transpose() * g;
    if (bias) bias->grad.row(0) += g.colwise().sum();
    grad(x).noalias() += g * weight.value.transpose();
  });
}

Tape::Var Tape::add(Var a, Var b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) throw InvalidArgument("add: shape mismatch");
  const Var self = static_cast<Var>(nodes_.size());
  return push(value(a) + value(b), [this, self, a, b] {
    const Mat g = nodes_[self].grad;
    grad(a) += g;
    grad(b) += g;
  });
}

Tape::Var Tape::concat_cols(std::span<const Var> parts) {
  long cols = 0;
  const long rows = value(parts[0]).rows();
  for (Var p : parts) cols += value(p).cols();
  Mat out(rows, cols);
  long at = 0;
  for (Var p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  const Var self = static_cast<Var>(nodes_.size());
  return push(std::move(out), [this, self, ps = std::move(ps)] {
    long at = 0;
    for (Var p : ps) {
      const long c = value(p).cols();
      grad(p) += nodes_[self].grad.middleCols(at, c);
      at += c;
    }
  });
}

Tape::Var Tape::concat_rows(std::span<const Var> parts) {
  long rows = 0;
  const long cols = value(parts[0]).cols();
  for (Var p : parts) rows += value(p).rows();
  Mat out(rows, cols);
  long at = 0;
  for (Var p : parts) {
    out.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  const Var self = static_cast<Var>(nodes_.size());
  return push(std::move(out), [this, self, ps = std::move(ps)] {
    long at = 0;
    for (Var p : ps) {
      const long r = value(p).rows();
      grad(p) += nodes_[self].grad.middleRows(at, r);
      at += r;
    }
  });
}

Tape::Var Tape::slice_rows(Var x, long begin, long count) {
  const Var self = static_cast<Var>(nodes_.size());
  return push(value(x).middleRows(begin, count),
              [this, self, x, begin, count] { grad(x).middleRows(begin, count) += nodes_[self].grad; });
}

Tape::Var Tape::layer_norm(Var x, Param& gamma, Param& beta) {
  Mat xhat;
  RowVec istd;
  Mat out = ops::layer_norm(value(x), gamma, beta, &xhat, &istd);
  const Var self = static_cast<Var>(nodes_.size());
  return push(std::move(out), [this, self, x, &gamma, &beta, xhat = std::move(xhat), istd = std::move(istd)] {
    const Mat& g = nodes_[self].grad;
    gamma.grad.row(0) += (g.array() * xhat.array()).colwise().sum().matrix();
    beta.grad.row(0) += g.colwise().sum();
    const Mat dxhat = g.array().rowwise() * gamma.value.row(0).array();
    Mat& gx = grad(x);
    for (long i = 0; i < g.rows(); ++i) {
      const double m1 = dxhat.row(i).mean();
      const double m2 = (dxhat.row(i).array() * xhat.row(i).array()).mean();
      gx.row(i).array() += istd(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
    }
  });
}

Tape::Var Tape::gelu(Var x) {
  const Var self = static_cast<Var>(nodes_.size());
  return push(ops::gelu(value(x)), [this, self, x] {
    grad(x).array() += nodes_[self].grad.array() * value(x).unaryExpr(&ops::gelu_grad).array();
  });
}

Tape::Var Tape::dropout(Var x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  Mat mask(value(x).rows(), value(x).cols());
  for (long i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  Mat out = value(x).cwiseProduct(mask);
  const Var self = static_cast<Var>(nodes_.size());
  return push(std::move(out), [this, self, x, mask = std::move(mask)] {
    grad(x) += nodes_[self].grad.cwiseProduct(mask);
  });
}

Tape::Var Tape::causal_attention(Var q, Var k, Var v, int heads) {
  std::vector<Mat> probs;
  Mat out = ops::attention(value(q), value(k), value(v), heads, 0, &probs);
  const Var self = static_cast<Var>(nodes_.size());
  return push(std::move(out), [this, self, q, k, v, heads, probs = std::move(probs)] {
    const Mat& g = nodes_[self].grad;
    const long d = g.cols(), dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Mat& gq = grad(q);
    Mat& gk = grad(k);
    Mat& gv = grad(v);
    for (int h = 0; h < heads; ++h) {
      const Mat& p = probs[h];
      const auto go = g.middleCols(h * dh, dh);
      gv.middleCols(h * dh, dh).noalias() += p.transpose() * go;
      Mat dp = go * value(v).middleCols(h * dh, dh).transpose();
      const Eigen::VectorXd row_dot = (dp.array() * p.array()).rowwise().sum();
      Mat ds = p.array() * (dp.array().colwise() - row_dot.array());
      gq.middleCols(h * dh, dh).noalias() += scale * ds * value(k).middleCols(h * dh, dh);
      gk.middleCols(h * dh, dh).noalias() += scale * ds.transpose() * value(q).middleCols(h * dh, dh);
    }
  });
}

Tape::Var Tape::cross_entropy(Var logits, std::span<const int> targets, std::span<const double> weights,
                              double scale) {
  const Mat& z = value(logits);
  Mat probs = Mat::Zero(z.rows(), z.cols());
  double loss = 0.0;
  for (long i = 0; i < z.rows(); ++i) {
    if (weights[i] == 0.0) continue;
    const double mx = z.row(i).maxCoeff();
    const RowVec e = (z.row(i).array() - mx).exp().matrix();
    const double sum = e.sum();
    loss += weights[i] * (mx + std::log(sum) - z(i, targets[i]));
    probs.row(i) = e / sum;
  }
  Mat out(1, 1);
  out(0, 0) = scale * loss;
  std::vector<int> t(targets.begin(), targets.end());
  std::vector<double> w(weights.begin(), weights.end());
  const Var self = static_cast<Var>(nodes_.size());
  return push(std::move(out), [this, self, logits, scale, probs = std::move(probs), t = std::move(t), w = std::move(w)] {
    const double up = nodes_[self].grad(0, 0) * scale;
    Mat& g = grad(logits);
    for (long i = 0; i < probs.rows(); ++i) {
      if (w[i] == 0.0) continue;
      g.row(i) += up * w[i] * probs.row(i);
      g(i, t[i]) -= up * w[i];
    }
  });
}

Tape::Var Tape::sum(std::span<const Var> scalars) {
  Mat out = Mat::Zero(1, 1);
  for (Var s : scalars) out(0, 0) += value(s)(0, 0);
  std::vector<Var> ss(scalars.begin(), scalars.end());
  const Var self = static_cast<Var>(nodes_.size());
  return push(std::move(out), [this, self, ss = std::move(ss)] {
    for (Var s : ss) grad(s)(0, 0) += nodes_[self].grad(0, 0);
  });
}

void Tape::backward(Var scalar) {
  grad(scalar)(0, 0) = 1.0;
  for (Var i = scalar; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward();
  }
}

}  // namespace cmt::model
