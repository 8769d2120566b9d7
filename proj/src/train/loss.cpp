#include "rnmt/loss.h"

#include <cmath>
#include <stdexcept>

#include "rnmt/error.h"
#include "rnmt/ops.h"
#include "rnmt/positional.h"

namespace rnmt {

Tensor nll_label_smoothed(Tape& tape, const Tensor& logits, std::span<const std::int32_t> targets, double smoothing,
                          std::span<const std::uint8_t> mask) {
  if (smoothing < 0 || smoothing >= 1) throw std::invalid_argument("label smoothing must be in [0,1)");
  if (logits.rank() != 2) throw std::invalid_argument("nll: logits must be [rows x vocab]");
  const std::size_t n = logits.rows(), v = logits.cols();
  if (targets.size() != n) throw std::invalid_argument("nll: one target per logits row required");
  if (!mask.empty() && mask.size() != n) throw std::invalid_argument("nll: mask length mismatch");
  for (auto t : targets)
    if (t < 0 || static_cast<std::size_t>(t) >= v)
      throw std::invalid_argument("nll: target id " + std::to_string(t) + " outside vocabulary of " + std::to_string(v));

  auto lv = logits.data();
  std::vector<double> probs(n * v);
  double total = 0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (!mask.empty() && !mask[r]) continue;
    const double* row = lv.data() + r * v;
    double mx = row[0];
    for (std::size_t c = 1; c < v; ++c) mx = std::max(mx, row[c]);
    double z = 0;
    for (std::size_t c = 0; c < v; ++c) z += std::exp(row[c] - mx);
    const double log_z = mx + std::log(z);
    double mean_nll = 0;
    for (std::size_t c = 0; c < v; ++c) {
      probs[r * v + c] = std::exp(row[c] - log_z);
      mean_nll += log_z - row[c];
    }
    mean_nll /= static_cast<double>(v);
    const double target_nll = log_z - row[static_cast<std::size_t>(targets[r])];
    total += (1.0 - smoothing) * target_nll + smoothing * mean_nll;
    ++count;
  }
  if (count == 0) throw std::invalid_argument("nll: every row is masked");
  Tensor out = Tensor::scalar(total / static_cast<double>(count));
  if (tape.wants({&logits})) {
    out.set_requires_grad();
    tape.record("nll_label_smoothed",
                [logits, out, n, v, smoothing, count, probs = std::move(probs),
                 targets = std::vector<std::int32_t>(targets.begin(), targets.end()),
                 mask = std::vector<std::uint8_t>(mask.begin(), mask.end())]() mutable {
                  if (!out.has_grad()) return;
                  const double g = out.grad()[0] / static_cast<double>(count);
                  auto lg = logits.ensure_grad();
                  const double uniform = smoothing / static_cast<double>(v);
                  for (std::size_t r = 0; r < n; ++r) {
                    if (!mask.empty() && !mask[r]) continue;
                    for (std::size_t c = 0; c < v; ++c) {
                      double target = uniform;
                      if (static_cast<std::int32_t>(c) == targets[r]) target += 1.0 - smoothing;
                      lg[r * v + c] += g * (probs[r * v + c] - target);
                    }
                  }
                });
  }
  return out;
}

Tensor reordering_loss(Tape& tape, const Tensor& pr, const Tensor& re, std::span<const std::uint8_t> mask,
                       std::size_t sentences) {
  if (pr.shape() != re.shape())
    throw std::invalid_argument("reordering_loss: PR " + shape_str(pr.shape()) + " vs RE " + shape_str(re.shape()));
  if (sentences == 0) throw std::invalid_argument("reordering_loss: zero sentences");
  const std::size_t n = pr.rows(), d = pr.cols();
  if (!mask.empty() && mask.size() != n) throw std::invalid_argument("reordering_loss: mask length mismatch");
  auto pv = pr.data();
  auto rv = re.data();
  std::vector<double> pn(n), rn(n), cosv(n, 0.0);
  double total = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (!mask.empty() && !mask[r]) continue;
    double dot = 0, pp = 0, rr = 0;
    for (std::size_t c = 0; c < d; ++c) {
      dot += pv[r * d + c] * rv[r * d + c];
      pp += pv[r * d + c] * pv[r * d + c];
      rr += rv[r * d + c] * rv[r * d + c];
    }
    pn[r] = std::sqrt(pp);
    rn[r] = std::sqrt(rr);
    if (pn[r] > 0 && rn[r] > 0) cosv[r] = dot / (pn[r] * rn[r]);
    total += cosv[r];
  }
  const double inv_s = 1.0 / static_cast<double>(sentences);
  Tensor out = Tensor::scalar(total * inv_s);
  if (tape.wants({&pr})) {
    out.set_requires_grad();
    tape.record("reordering_loss", [pr, re, out, n, d, inv_s, pn = std::move(pn), rn = std::move(rn),
                                    cosv = std::move(cosv)]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0] * inv_s;
      auto pg = pr.ensure_grad();
      auto pv = pr.data();
      auto rv = re.data();
      for (std::size_t r = 0; r < n; ++r) {
        if (pn[r] == 0 || rn[r] == 0) continue;
        const double a = 1.0 / (pn[r] * rn[r]);
        const double b = cosv[r] / (pn[r] * pn[r]);
        for (std::size_t c = 0; c < d; ++c) pg[r * d + c] += g * (rv[r * d + c] * a - pv[r * d + c] * b);
      }
    });
  }
  return out;
}

Tensor batch_supervised_embeddings(const Batch& batch, std::size_t d_model) {
  if (batch.positions.size() != batch.sentences())
    throw std::invalid_argument("batch carries no position sequences");
  std::vector<double> values;
  values.reserve(batch.src.rows() * d_model);
  for (std::size_t i = 0; i < batch.sentences(); ++i) {
    if (batch.positions[i].size() != batch.src.lengths[i])
      throw std::invalid_argument("position sequence length differs from source length");
    Tensor re = supervised_position_embeddings(batch.positions[i], d_model);
    values.insert(values.end(), re.data().begin(), re.data().end());
  }
  return Tensor(Shape{batch.src.rows(), d_model}, std::move(values));
}

LossTerms total_loss(Tape& tape, const Model& model, const Batch& batch, const LossOptions& opts) {
  const auto& cfg = model.config();
  if (opts.lambda < 0) throw ConfigError("lambda must be >= 0");
  if (opts.lambda > 0 && cfg.variant == Variant::kBaseline)
    throw ConfigError("a reordering loss weight > 0 needs the exgre or refsr variant");
  if (opts.lambda > 0 && !batch.has_positions()) throw ConfigError("a reordering loss weight > 0 needs position sequences");

  EncoderState enc = model.encode(tape, batch.src, opts.encode);
  Tensor logits = model.decode(tape, enc, batch.src, batch.tgt_in, opts.encode);
  LossTerms terms;
  terms.nll = nll_label_smoothed(tape, logits, batch.tgt_out, opts.smoothing, batch.tgt_mask);
  terms.tokens = batch.tgt_out.size();
  terms.total = terms.nll;
  if (cfg.variant != Variant::kBaseline && batch.has_positions()) {
    Tensor re = batch_supervised_embeddings(batch, cfg.d_model);
    if (opts.lambda > 0) {
      terms.reorder = reordering_loss(tape, enc.final_reordered, re, {}, batch.sentences());
      terms.total = ops::sub(tape, terms.nll, ops::scale(tape, terms.reorder, opts.lambda));
    } else {
      // Reported only; kept off the tape.
      Tape detached(Tape::Mode::kInference);
      terms.reorder = reordering_loss(detached, enc.final_reordered.detach(), re, {}, batch.sentences());
    }
  }
  return terms;
}

}  // namespace rnmt
