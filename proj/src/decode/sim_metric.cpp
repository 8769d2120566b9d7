#include "rnmt/sim_metric.h"

#include <cmath>
#include <stdexcept>

#include "rnmt/error.h"
#include "rnmt/loss.h"

namespace rnmt {

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 0.0;
  return dot / (std::sqrt(aa) * std::sqrt(bb));
}

SimResult sim_metric(const Model& model, std::span<const Example> examples, std::size_t batch_size,
                     const EncodeOptions& opts) {
  if (model.config().variant == Variant::kBaseline)
    throw ConfigError("the similarity metric needs an exgre or refsr model");
  if (examples.empty()) throw std::invalid_argument("sim_metric: empty test set");
  for (const auto& ex : examples)
    if (!ex.positions) throw DataError("sim_metric: every test sentence needs a position sequence");
  const std::size_t d = model.config().d_model;
  SimResult res;
  double pr_sum = 0, pe_sum = 0;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t end = std::min(examples.size(), start + batch_size);
    Batch batch = make_batch(examples.subspan(start, end - start));
    Tape tape(Tape::Mode::kInference);
    EncoderState enc = model.encode(tape, batch.src, opts);
    Tensor re = batch_supervised_embeddings(batch, d);
    const auto positions = batch.src.row_positions();
    for (std::size_t row = 0; row < batch.src.rows(); ++row) {
      auto re_row = re.data().subspan(row * d, d);
      pr_sum += cosine(enc.final_reordered.data().subspan(row * d, d), re_row);
      pe_sum += cosine(model.table().row(positions[row]), re_row);
    }
    res.tokens += batch.src.rows();
  }
  res.reordered = pr_sum / static_cast<double>(res.tokens);
  res.positional = pe_sum / static_cast<double>(res.tokens);
  return res;
}

}  // namespace rnmt
