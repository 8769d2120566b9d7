#include "rnmt/attention.h"

#include <cmath>
#include <stdexcept>

#include "rnmt/eigen_view.h"
#include "rnmt/ops.h"

namespace rnmt {
namespace {

using Block = Eigen::Block<ConstMatrixView>;

struct HeadCache {
  RowMatrix probs;  // softmax output
  RowMatrix kept;   // after dropout, what multiplied V
  RowMatrix mask;   // dropout multipliers, empty when no dropout
};

}  // namespace

Tensor scaled_dot_attention(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const AttentionSpan> spans, const AttentionOptions& opts,
                            std::vector<std::vector<double>>* weights) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || k.shape() != v.shape() || q.cols() != k.cols())
    throw std::invalid_argument("attention: incompatible q " + shape_str(q.shape()) + ", k " + shape_str(k.shape()) +
                                ", v " + shape_str(v.shape()));
  const std::size_t d = q.cols();
  if (opts.heads == 0 || d % opts.heads != 0)
    throw std::invalid_argument("attention: " + std::to_string(opts.heads) + " heads do not divide d_model " +
                                std::to_string(d));
  if (opts.dropout > 0 && !opts.rng) throw std::invalid_argument("attention: dropout needs a random generator");
  for (const auto& s : spans) {
    if (s.q_len == 0 || s.k_len == 0 || s.q_offset + s.q_len > q.rows() || s.k_offset + s.k_len > k.rows())
      throw std::invalid_argument("attention: span outside packed batch");
    if (opts.causal && s.q_len != s.k_len) throw std::invalid_argument("attention: causal mask needs q_len == k_len");
  }
  const std::size_t heads = opts.heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto ldh = static_cast<Eigen::Index>(dh);

  Tensor out(Shape{q.rows(), d});
  auto qm = as_matrix(q);
  auto km = as_matrix(k);
  auto vm = as_matrix(v);
  auto om = as_matrix(out);
  std::vector<HeadCache> cache(spans.size() * heads);
  std::bernoulli_distribution keep(1.0 - opts.dropout);
  const double keep_scale = opts.dropout > 0 ? 1.0 / (1.0 - opts.dropout) : 1.0;

  for (std::size_t si = 0; si < spans.size(); ++si) {
    const auto& s = spans[si];
    const auto qo = static_cast<Eigen::Index>(s.q_offset), ql = static_cast<Eigen::Index>(s.q_len);
    const auto ko = static_cast<Eigen::Index>(s.k_offset), kl = static_cast<Eigen::Index>(s.k_len);
    for (std::size_t h = 0; h < heads; ++h) {
      const auto c0 = static_cast<Eigen::Index>(h * dh);
      HeadCache& hc = cache[si * heads + h];
      hc.probs.noalias() = qm.block(qo, c0, ql, ldh) * km.block(ko, c0, kl, ldh).transpose();
      hc.probs *= scale;
      for (Eigen::Index i = 0; i < ql; ++i) {
        const Eigen::Index visible = opts.causal ? i + 1 : kl;
        double mx = -INFINITY;
        for (Eigen::Index j = 0; j < visible; ++j) mx = std::max(mx, hc.probs(i, j));
        double z = 0;
        for (Eigen::Index j = 0; j < kl; ++j) {
          const double e = j < visible ? std::exp(hc.probs(i, j) - mx) : 0.0;
          hc.probs(i, j) = e;
          z += e;
        }
        hc.probs.row(i) /= z;
      }
      if (weights) weights->emplace_back(hc.probs.data(), hc.probs.data() + hc.probs.size());
      if (opts.dropout > 0) {
        hc.mask.resize(ql, kl);
        for (Eigen::Index i = 0; i < hc.mask.size(); ++i) hc.mask.data()[i] = keep(*opts.rng) ? keep_scale : 0.0;
        hc.kept = hc.probs.cwiseProduct(hc.mask);
      } else {
        hc.kept = hc.probs;
      }
      om.block(qo, c0, ql, ldh).noalias() = hc.kept * vm.block(ko, c0, kl, ldh);
    }
  }

  if (tape.wants({&q, &k, &v})) {
    out.set_requires_grad();
    std::vector<AttentionSpan> span_copy(spans.begin(), spans.end());
    tape.record("attention", [q, k, v, out, heads, dh, scale, spans = std::move(span_copy),
                               cache = std::move(cache)]() mutable {
      if (!out.has_grad()) return;
      auto g = grad_matrix(out);
      q.ensure_grad();
      k.ensure_grad();
      v.ensure_grad();
      auto qm = as_matrix(std::as_const(q));
      auto km = as_matrix(std::as_const(k));
      auto vm = as_matrix(std::as_const(v));
      auto qg = grad_matrix(q);
      auto kg = grad_matrix(k);
      auto vg = grad_matrix(v);
      const auto ldh = static_cast<Eigen::Index>(dh);
      RowMatrix dkept, dscore;
      for (std::size_t si = 0; si < spans.size(); ++si) {
        const auto& s = spans[si];
        const auto qo = static_cast<Eigen::Index>(s.q_offset), ql = static_cast<Eigen::Index>(s.q_len);
        const auto ko = static_cast<Eigen::Index>(s.k_offset), kl = static_cast<Eigen::Index>(s.k_len);
        for (std::size_t h = 0; h < heads; ++h) {
          const auto c0 = static_cast<Eigen::Index>(h * dh);
          const HeadCache& hc = cache[si * heads + h];
          auto go = g.block(qo, c0, ql, ldh);
          vg.block(ko, c0, kl, ldh).noalias() += hc.kept.transpose() * go;
          dkept.noalias() = go * vm.block(ko, c0, kl, ldh).transpose();
          if (hc.mask.size()) dkept = dkept.cwiseProduct(hc.mask);
          // softmax adjoint per row
          dscore = dkept;
          for (Eigen::Index i = 0; i < ql; ++i) {
            const double dot = dkept.row(i).dot(hc.probs.row(i));
            for (Eigen::Index j = 0; j < kl; ++j) dscore(i, j) = hc.probs(i, j) * (dkept(i, j) - dot);
          }
          dscore *= scale;
          qg.block(qo, c0, ql, ldh).noalias() += dscore * km.block(ko, c0, kl, ldh);
          kg.block(ko, c0, kl, ldh).noalias() += dscore.transpose() * qm.block(qo, c0, ql, ldh);
        }
      }
    });
  }
  return out;
}

AttentionParams AttentionParams::create(ParameterSet& params, const std::string& prefix, std::size_t d_model,
                                        std::mt19937_64& rng) {
  AttentionParams p;
  p.wq = params.add(prefix + ".wq", xavier_uniform(d_model, d_model, rng));
  p.bq = params.add(prefix + ".bq", Tensor(Shape{d_model}));
  p.wk = params.add(prefix + ".wk", xavier_uniform(d_model, d_model, rng));
  p.bk = params.add(prefix + ".bk", Tensor(Shape{d_model}));
  p.wv = params.add(prefix + ".wv", xavier_uniform(d_model, d_model, rng));
  p.bv = params.add(prefix + ".bv", Tensor(Shape{d_model}));
  p.wo = params.add(prefix + ".wo", xavier_uniform(d_model, d_model, rng));
  p.bo = params.add(prefix + ".bo", Tensor(Shape{d_model}));
  return p;
}

Tensor multi_head_attention(Tape& tape, const AttentionParams& p, const Tensor& query, const Tensor& memory,
                            std::span<const AttentionSpan> spans, const AttentionOptions& opts,
                            std::vector<std::vector<double>>* weights) {
  Tensor q = ops::linear(tape, query, p.wq, p.bq);
  Tensor k = ops::linear(tape, memory, p.wk, p.bk);
  Tensor v = ops::linear(tape, memory, p.wv, p.bv);
  Tensor ctx = scaled_dot_attention(tape, q, k, v, spans, opts, weights);
  return ops::linear(tape, ctx, p.wo, p.bo);
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(Shape{fan_in, fan_out});
  for (double& x : t.data()) x = dist(rng);
  return t;
}

}  // namespace rnmt
