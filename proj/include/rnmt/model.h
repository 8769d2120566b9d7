#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "rnmt/adam.h"
#include "rnmt/attention.h"
#include "rnmt/batch.h"
#include "rnmt/positional.h"

namespace rnmt {

enum class Variant { kBaseline, kExgre, kRefsr };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
inline std::ostream& operator<<(std::ostream& os, Variant v) { return os << to_string(v); }

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t d_ff = 256;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  double dropout = 0.1;
  std::size_t max_len = 64;
  Variant variant = Variant::kBaseline;
  double lambda = 0.0;         // reordering-loss weight
  double window = 0.5;         // Gaussian window half-width D
  double sigma = 0.25;         // D / 2
  std::uint64_t seed = 1;

  // Throws ConfigError on an inconsistent configuration.
  void validate() const;

  // key = value form shared by config files and checkpoints.
  std::map<std::string, std::string> to_kv() const;
  // Returns false when key is not a model key; throws ConfigError on a bad value.
  bool set(const std::string& key, const std::string& value);
};

struct EncodeOptions {
  bool train = false;                  // enables dropout
  std::mt19937_64* rng = nullptr;      // required when train && dropout > 0
  std::optional<double> forced_gate;   // ReFSR: replace g by this constant
  // ExGRE: replace predicted b for every packed row (test hook).
  const std::vector<double>* forced_positions = nullptr;
};

struct EncoderState {
  Tensor output;                     // representation fed to the decoder
  std::vector<Tensor> hidden;        // per-layer sublayer output (H^n or its reordering-aware counterpart)
  std::vector<Tensor> positions;     // per-layer B^n [N x 1]
  std::vector<Tensor> reordered;     // per-layer PR^n [N x d]
  Tensor final_reordered;            // PR^N, supervised by the reordering loss
  Tensor baseline_output;            // ReFSR: original-order path H^N
  Tensor reordered_output;           // ReFSR: reordering-aware path
  Tensor gate;                       // ReFSR: g [N x 1]
  std::vector<std::size_t> row_lengths;
};

struct EncoderLayer {
  AttentionParams self;
  Tensor ln1_g, ln1_b;
  Tensor ff_w1, ff_b1, ff_w2, ff_b2;
  Tensor ln2_g, ln2_b;
};

struct DecoderLayer {
  AttentionParams self;
  Tensor ln1_g, ln1_b;
  AttentionParams cross;
  Tensor ln2_g, ln2_b;
  Tensor ff_w1, ff_b1, ff_w2, ff_b2;
  Tensor ln3_g, ln3_b;
};

// Transformer encoder-decoder with a baseline, an explicit global reordering
// (ExGRE) or a reordering-fusion (ReFSR) encoder. Parameters are created from
// config.seed; the object is immutable during forward passes.
class Model {
 public:
  explicit Model(ModelConfig config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const PositionalTable& table() const { return table_; }
  const std::vector<ReorderPredictor>& predictors() const { return predictors_; }

  // Dispatches on the configured variant.
  EncoderState encode(Tape& tape, const PackedSequences& src, const EncodeOptions& opts = {}) const;

  // Plain post-LN stack over PE-summed embeddings.
  EncoderState encode_baseline(Tape& tape, const PackedSequences& src, const EncodeOptions& opts = {}) const;
  // Per layer: sublayers, position prediction, Gaussian selection, injection.
  EncoderState encode_exgre(Tape& tape, const PackedSequences& src, const EncodeOptions& opts = {}) const;
  // Both paths with shared sublayers, fused once by a per-position gate.
  EncoderState encode_refsr(Tape& tape, const PackedSequences& src, const EncodeOptions& opts = {}) const;

  // Logits [rows(tgt_in) x tgt_vocab]. memory holds encoder rows; target
  // sentence i attends memory rows [memory_offsets[i], +memory_lengths[i]).
  Tensor decode(Tape& tape, const Tensor& memory, std::span<const std::size_t> memory_offsets,
                std::span<const std::size_t> memory_lengths, const PackedSequences& tgt_in,
                const EncodeOptions& opts = {}) const;

  // Self-attention and feed-forward sublayers of encoder layer n on an
  // already embedded input.
  Tensor encoder_layer(Tape& tape, std::size_t n, const Tensor& x, std::span<const AttentionSpan> spans,
                       const EncodeOptions& opts = {}) const;

  // Convenience for a batch whose target i attends source i.
  Tensor decode(Tape& tape, const EncoderState& enc, const PackedSequences& src, const PackedSequences& tgt_in,
                const EncodeOptions& opts = {}) const;

 private:
  Tensor embed(Tape& tape, const Tensor& table, const PackedSequences& seq, const EncodeOptions& opts) const;
  Tensor residual_dropout(Tape& tape, const Tensor& x, const EncodeOptions& opts) const;

  ModelConfig config_;
  ParameterSet params_;
  PositionalTable table_;
  Tensor src_embed_, tgt_embed_;
  std::vector<EncoderLayer> encoder_;
  std::vector<DecoderLayer> decoder_;
  std::vector<ReorderPredictor> predictors_;
  Tensor gate_u_, gate_w_;
  Tensor out_w_, out_b_;
};

std::vector<AttentionSpan> self_spans(const PackedSequences& seq);

}  // namespace rnmt
