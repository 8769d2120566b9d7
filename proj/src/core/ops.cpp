#include "rnmt/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rnmt/eigen_view.h"

namespace rnmt::ops {
namespace {

const char* unary_name(Unary k) {
  switch (k) {
    case Unary::kSigmoid: return "sigmoid";
    case Unary::kTanh: return "tanh";
    case Unary::kRelu: return "relu";
    case Unary::kExp: return "exp";
  }
  return "unary";
}

const char* binary_name(Binary k) {
  switch (k) {
    case Binary::kAdd: return "add";
    case Binary::kSub: return "sub";
    case Binary::kMul: return "mul";
  }
  return "binary";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw std::invalid_argument(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor unary(Tape& tape, Unary kind, const Tensor& x) {
  Tensor out(x.shape());
  auto xv = x.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    switch (kind) {
      case Unary::kSigmoid: ov[i] = sigmoid_scalar(xv[i]); break;
      case Unary::kTanh: ov[i] = std::tanh(xv[i]); break;
      case Unary::kRelu: ov[i] = xv[i] > 0 ? xv[i] : 0.0; break;
      case Unary::kExp: ov[i] = std::exp(xv[i]); break;
    }
  }
  if (tape.wants({&x})) {
    out.set_requires_grad();
    tape.record(unary_name(kind), [kind, x, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto xg = x.ensure_grad();
      auto xv = x.data();
      auto ov = out.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        double d = 0;
        switch (kind) {
          case Unary::kSigmoid: d = ov[i] * (1.0 - ov[i]); break;
          case Unary::kTanh: d = 1.0 - ov[i] * ov[i]; break;
          case Unary::kRelu: d = xv[i] > 0 ? 1.0 : 0.0; break;
          case Unary::kExp: d = ov[i]; break;
        }
        xg[i] += g[i] * d;
      }
    });
  }
  return out;
}

Tensor binary(Tape& tape, Binary kind, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "elementwise");
  Tensor out(a.shape());
  auto av = a.data();
  auto bv = b.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    switch (kind) {
      case Binary::kAdd: ov[i] = av[i] + bv[i]; break;
      case Binary::kSub: ov[i] = av[i] - bv[i]; break;
      case Binary::kMul: ov[i] = av[i] * bv[i]; break;
    }
  }
  if (tape.wants({&a, &b})) {
    out.set_requires_grad();
    tape.record(binary_name(kind), [kind, a, b, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ag = a.ensure_grad();
        auto bv = b.data();
        for (std::size_t i = 0; i < g.size(); ++i) ag[i] += kind == Binary::kMul ? g[i] * bv[i] : g[i];
      }
      if (b.requires_grad()) {
        auto bg = b.ensure_grad();
        auto av = a.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
          switch (kind) {
            case Binary::kAdd: bg[i] += g[i]; break;
            case Binary::kSub: bg[i] -= g[i]; break;
            case Binary::kMul: bg[i] += g[i] * av[i]; break;
          }
        }
      }
    });
  }
  return out;
}

Tensor affine(Tape& tape, const Tensor& x, double scale, double shift) {
  Tensor out(x.shape());
  auto xv = x.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = scale * xv[i] + shift;
  if (tape.wants({&x})) {
    out.set_requires_grad();
    tape.record("affine", [scale, x, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto xg = x.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) xg[i] += scale * g[i];
    });
  }
  return out;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " . " +
                                shape_str(b.shape()));
  Tensor out(Shape{a.dim(0), b.dim(1)});
  as_matrix(out).noalias() = as_matrix(a) * as_matrix(b);
  if (tape.wants({&a, &b})) {
    out.set_requires_grad();
    tape.record("matmul", [a, b, out]() mutable {
      if (!out.has_grad()) return;
      auto g = grad_matrix(out);
      if (a.requires_grad()) {
        a.ensure_grad();
        grad_matrix(a).noalias() += g * as_matrix(b).transpose();
      }
      if (b.requires_grad()) {
        b.ensure_grad();
        grad_matrix(b).noalias() += as_matrix(a).transpose() * g;
      }
    });
  }
  return out;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_matrix(x, "linear");
  require_matrix(weight, "linear");
  if (x.dim(1) != weight.dim(0))
    throw std::invalid_argument("linear: input " + shape_str(x.shape()) + " does not match weight " +
                                shape_str(weight.shape()));
  const bool has_bias = bias.defined();
  if (has_bias && bias.size() != weight.dim(1))
    throw std::invalid_argument("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                                shape_str(weight.shape()));
  Tensor out(Shape{x.dim(0), weight.dim(1)});
  auto om = as_matrix(out);
  om.noalias() = as_matrix(x) * as_matrix(weight);
  if (has_bias) om.rowwise() += as_row(bias);
  const bool wants = has_bias ? tape.wants({&x, &weight, &bias}) : tape.wants({&x, &weight});
  if (wants) {
    out.set_requires_grad();
    tape.record("linear", [x, weight, bias, has_bias, out]() mutable {
      if (!out.has_grad()) return;
      auto g = grad_matrix(out);
      if (x.requires_grad()) {
        x.ensure_grad();
        grad_matrix(x).noalias() += g * as_matrix(weight).transpose();
      }
      if (weight.requires_grad()) {
        weight.ensure_grad();
        grad_matrix(weight).noalias() += as_matrix(x).transpose() * g;
      }
      if (has_bias && bias.requires_grad()) {
        bias.ensure_grad();
        grad_row(bias) += g.colwise().sum();
      }
    });
  }
  return out;
}

Tensor add_row(Tape& tape, const Tensor& x, const Tensor& row) {
  if (row.size() != x.cols())
    throw std::invalid_argument("add_row: row " + shape_str(row.shape()) + " vs input " + shape_str(x.shape()));
  Tensor out(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
  as_matrix(out).rowwise() += as_row(row);
  if (tape.wants({&x, &row})) {
    out.set_requires_grad();
    tape.record("add_row", [x, row, out]() mutable {
      if (!out.has_grad()) return;
      auto g = grad_matrix(out);
      if (x.requires_grad()) {
        x.ensure_grad();
        grad_matrix(x) += g;
      }
      if (row.requires_grad()) {
        row.ensure_grad();
        grad_row(row) += g.colwise().sum();
      }
    });
  }
  return out;
}

Tensor mul_col(Tape& tape, const Tensor& x, const Tensor& col) {
  if (col.size() != x.rows())
    throw std::invalid_argument("mul_col: column " + shape_str(col.shape()) + " vs input " + shape_str(x.shape()));
  Tensor out(x.shape());
  const std::size_t n = x.rows(), d = x.cols();
  auto xv = x.data();
  auto cv = col.data();
  auto ov = out.data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) ov[r * d + c] = cv[r] * xv[r * d + c];
  if (tape.wants({&x, &col})) {
    out.set_requires_grad();
    tape.record("mul_col", [x, col, out, n, d]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (x.requires_grad()) {
        auto xg = x.ensure_grad();
        auto cv = col.data();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < d; ++c) xg[r * d + c] += cv[r] * g[r * d + c];
      }
      if (col.requires_grad()) {
        auto cg = col.ensure_grad();
        auto xv = x.data();
        for (std::size_t r = 0; r < n; ++r) {
          double acc = 0;
          for (std::size_t c = 0; c < d; ++c) acc += xv[r * d + c] * g[r * d + c];
          cg[r] += acc;
        }
      }
    });
  }
  return out;
}

Tensor softmax(Tape& tape, const Tensor& x, std::size_t axis) {
  if (axis >= x.rank())
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(x.shape()));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t n = x.dim(axis);
  Tensor out(x.shape());
  auto xv = x.data();
  auto ov = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -INFINITY;
      for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, xv[base + k * inner]);
      double z = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const double e = std::exp(xv[base + k * inner] - mx);
        ov[base + k * inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < n; ++k) ov[base + k * inner] /= z;
    }
  }
  if (tape.wants({&x})) {
    out.set_requires_grad();
    tape.record("softmax", [x, out, outer, inner, n]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto xg = x.ensure_grad();
      auto ov = out.data();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * n * inner + in;
          double dot = 0;
          for (std::size_t k = 0; k < n; ++k) dot += g[base + k * inner] * ov[base + k * inner];
          for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = base + k * inner;
            xg[i] += ov[i] * (g[i] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t d = x.cols();
  if (gain.size() != d || bias.size() != d)
    throw std::invalid_argument("layer_norm: last dimension " + std::to_string(d) + " vs gain " +
                                shape_str(gain.shape()) + " / bias " + shape_str(bias.shape()));
  const std::size_t n = x.rows();
  Tensor out(x.shape());
  std::vector<double> normalized(x.size());
  std::vector<double> inv_std(n);
  auto xv = x.data();
  auto gv = gain.data();
  auto bv = bias.data();
  auto ov = out.data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0;
    for (std::size_t c = 0; c < d; ++c) mu += row[c];
    mu /= static_cast<double>(d);
    double var = 0;
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(d);
    // Zero variance with eps == 0 maps to the zero vector rather than NaN.
    const double denom = std::sqrt(var + eps);
    const double inv = denom > 0 ? 1.0 / denom : 0.0;
    inv_std[r] = inv;
    for (std::size_t c = 0; c < d; ++c) {
      const double nh = (row[c] - mu) * inv;
      normalized[r * d + c] = nh;
      ov[r * d + c] = gv[c] * nh + bv[c];
    }
  }
  if (tape.wants({&x, &gain, &bias})) {
    out.set_requires_grad();
    tape.record("layer_norm", [x, gain, bias, out, n, d, normalized = std::move(normalized),
                               inv_std = std::move(inv_std)]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto gv = gain.data();
      if (gain.requires_grad()) {
        auto gg = gain.ensure_grad();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < d; ++c) gg[c] += g[r * d + c] * normalized[r * d + c];
      }
      if (bias.requires_grad()) {
        auto bg = bias.ensure_grad();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < d; ++c) bg[c] += g[r * d + c];
      }
      if (x.requires_grad()) {
        auto xg = x.ensure_grad();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < n; ++r) {
          double mean_dn = 0, mean_dn_n = 0;
          for (std::size_t c = 0; c < d; ++c) {
            const double dn = g[r * d + c] * gv[c];
            mean_dn += dn;
            mean_dn_n += dn * normalized[r * d + c];
          }
          mean_dn *= inv_d;
          mean_dn_n *= inv_d;
          for (std::size_t c = 0; c < d; ++c) {
            const double dn = g[r * d + c] * gv[c];
            xg[r * d + c] += inv_std[r] * (dn - mean_dn - normalized[r * d + c] * mean_dn_n);
          }
        }
      }
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double s = 0;
  for (double v : x.data()) s += v;
  Tensor out = Tensor::scalar(s);
  if (tape.wants({&x})) {
    out.set_requires_grad();
    tape.record("sum", [x, out]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      for (double& v : x.ensure_grad()) v += g;
    });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& x) {
  return scale(tape, sum(tape, x), 1.0 / static_cast<double>(x.size()));
}

Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const std::int32_t> ids) {
  require_matrix(table, "gather_rows");
  if (ids.empty()) throw std::invalid_argument("gather_rows: no ids");
  const std::size_t d = table.dim(1);
  const std::size_t v = table.dim(0);
  Tensor out(Shape{ids.size(), d});
  auto tv = table.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
      throw std::invalid_argument("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                                  std::to_string(v) + " rows");
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d, ov.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  if (tape.wants({&table})) {
    out.set_requires_grad();
    tape.record("gather_rows", [table, out, d, ids = std::vector<std::int32_t>(ids.begin(), ids.end())]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto tg = table.ensure_grad();
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t c = 0; c < d; ++c) tg[static_cast<std::size_t>(ids[i]) * d + c] += g[i * d + c];
    });
  }
  return out;
}

Tensor dropout(Tape& tape, const Tensor& x, double p, std::mt19937_64& rng) {
  if (p < 0 || p >= 1) throw std::invalid_argument("dropout: rate must be in [0,1)");
  if (p == 0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = keep(rng) ? s : 0.0;
  Tensor out(x.shape());
  auto xv = x.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] * mask[i];
  if (tape.wants({&x})) {
    out.set_requires_grad();
    tape.record("dropout", [x, out, mask = std::move(mask)]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto xg = x.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) xg[i] += g[i] * mask[i];
    });
  }
  return out;
}

}  // namespace rnmt::ops
