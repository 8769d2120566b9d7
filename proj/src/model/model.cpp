#include "rnmt/model.h"

#include <cmath>
#include <sstream>

#include "rnmt/error.h"
#include "rnmt/kv.h"
#include "rnmt/ops.h"

namespace rnmt {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kExgre: return "exgre";
    case Variant::kRefsr: return "refsr";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "baseline") return Variant::kBaseline;
  if (s == "exgre") return Variant::kExgre;
  if (s == "refsr") return Variant::kRefsr;
  throw ConfigError("unknown variant '" + s + "' (expected baseline, exgre or refsr)");
}

void ModelConfig::validate() const {
  if (d_model == 0 || d_model % 2 != 0) throw ConfigError("d_model must be a positive even number");
  if (heads == 0 || d_model % heads != 0) throw ConfigError("d_model must be divisible by heads");
  if (layers == 0) throw ConfigError("layers must be >= 1");
  if (d_ff == 0) throw ConfigError("d_ff must be >= 1");
  if (src_vocab < 5 || tgt_vocab < 5) throw ConfigError("vocabulary sizes must be set (>= 5)");
  if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must be in [0,1)");
  if (max_len < 2) throw ConfigError("max_len must be >= 2");
  if (lambda < 0) throw ConfigError("lambda must be >= 0");
  if (window <= 0 || sigma <= 0) throw ConfigError("window and sigma must be positive");
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
  return {
      {"d_model", kv::format(d_model)},   {"d_ff", kv::format(d_ff)},
      {"heads", kv::format(heads)},       {"layers", kv::format(layers)},
      {"src_vocab", kv::format(src_vocab)}, {"tgt_vocab", kv::format(tgt_vocab)},
      {"dropout", kv::format(dropout)},   {"max_len", kv::format(max_len)},
      {"variant", to_string(variant)},    {"lambda", kv::format(lambda)},
      {"window", kv::format(window)},     {"sigma", kv::format(sigma)},
      {"seed", kv::format(seed)},
  };
}

bool ModelConfig::set(const std::string& key, const std::string& value) {
  if (key == "d_model") d_model = kv::parse_size(key, value);
  else if (key == "d_ff") d_ff = kv::parse_size(key, value);
  else if (key == "heads") heads = kv::parse_size(key, value);
  else if (key == "layers") layers = kv::parse_size(key, value);
  else if (key == "src_vocab") src_vocab = kv::parse_size(key, value);
  else if (key == "tgt_vocab") tgt_vocab = kv::parse_size(key, value);
  else if (key == "dropout") dropout = kv::parse_double(key, value);
  else if (key == "max_len") max_len = kv::parse_size(key, value);
  else if (key == "variant") variant = parse_variant(value);
  else if (key == "lambda") lambda = kv::parse_double(key, value);
  else if (key == "window") window = kv::parse_double(key, value);
  else if (key == "sigma") sigma = kv::parse_double(key, value);
  else if (key == "seed") seed = kv::parse_u64(key, value);
  else return false;
  return true;
}

std::vector<AttentionSpan> self_spans(const PackedSequences& seq) {
  std::vector<AttentionSpan> spans;
  spans.reserve(seq.sentences());
  for (std::size_t i = 0; i < seq.sentences(); ++i)
    spans.push_back({seq.offsets[i], seq.lengths[i], seq.offsets[i], seq.lengths[i]});
  return spans;
}

namespace {

Tensor uniform_embedding(std::size_t rows, std::size_t d, std::mt19937_64& rng) {
  // std 1/sqrt(d), rescaled by sqrt(d) at lookup
  const double bound = std::sqrt(3.0 / static_cast<double>(d));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(Shape{rows, d});
  for (double& x : t.data()) x = dist(rng);
  return t;
}

Tensor ffn(Tape& tape, const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2, const Tensor& b2) {
  return ops::linear(tape, ops::relu(tape, ops::linear(tape, x, w1, b1)), w2, b2);
}

}  // namespace

Model::Model(ModelConfig config) : config_(std::move(config)), table_(config_.max_len + 1, config_.d_model) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const std::size_t d = config_.d_model;
  const std::size_t f = config_.d_ff;
  auto ones = [](std::size_t n) { return Tensor(Shape{n}, 1.0); };
  auto zeros = [](std::size_t n) { return Tensor(Shape{n}, 0.0); };

  src_embed_ = params_.add("src_embed", uniform_embedding(config_.src_vocab, d, rng));
  tgt_embed_ = params_.add("tgt_embed", uniform_embedding(config_.tgt_vocab, d, rng));
  for (std::size_t n = 0; n < config_.layers; ++n) {
    const std::string p = "enc" + std::to_string(n);
    EncoderLayer l;
    l.self = AttentionParams::create(params_, p + ".self", d, rng);
    l.ln1_g = params_.add(p + ".ln1.g", ones(d));
    l.ln1_b = params_.add(p + ".ln1.b", zeros(d));
    l.ff_w1 = params_.add(p + ".ff.w1", xavier_uniform(d, f, rng));
    l.ff_b1 = params_.add(p + ".ff.b1", zeros(f));
    l.ff_w2 = params_.add(p + ".ff.w2", xavier_uniform(f, d, rng));
    l.ff_b2 = params_.add(p + ".ff.b2", zeros(d));
    l.ln2_g = params_.add(p + ".ln2.g", ones(d));
    l.ln2_b = params_.add(p + ".ln2.b", zeros(d));
    encoder_.push_back(std::move(l));
  }
  for (std::size_t n = 0; n < config_.layers; ++n) {
    const std::string p = "dec" + std::to_string(n);
    DecoderLayer l;
    l.self = AttentionParams::create(params_, p + ".self", d, rng);
    l.ln1_g = params_.add(p + ".ln1.g", ones(d));
    l.ln1_b = params_.add(p + ".ln1.b", zeros(d));
    l.cross = AttentionParams::create(params_, p + ".cross", d, rng);
    l.ln2_g = params_.add(p + ".ln2.g", ones(d));
    l.ln2_b = params_.add(p + ".ln2.b", zeros(d));
    l.ff_w1 = params_.add(p + ".ff.w1", xavier_uniform(d, f, rng));
    l.ff_b1 = params_.add(p + ".ff.b1", zeros(f));
    l.ff_w2 = params_.add(p + ".ff.w2", xavier_uniform(f, d, rng));
    l.ff_b2 = params_.add(p + ".ff.b2", zeros(d));
    l.ln3_g = params_.add(p + ".ln3.g", ones(d));
    l.ln3_b = params_.add(p + ".ln3.b", zeros(d));
    decoder_.push_back(std::move(l));
  }
  out_w_ = params_.add("out.w", xavier_uniform(d, config_.tgt_vocab, rng));
  out_b_ = params_.add("out.b", zeros(config_.tgt_vocab));

  // Reordering parameters come last so every variant shares the initial
  // values of the common parameters for a given seed.
  if (config_.variant != Variant::kBaseline) {
    for (std::size_t n = 0; n < config_.layers; ++n) {
      const std::string p = "reorder" + std::to_string(n);
      ReorderPredictor pred;
      pred.weight = params_.add(p + ".w", xavier_uniform(d, d, rng));
      pred.score = params_.add(p + ".u", xavier_uniform(d, 1, rng));
      pred.window = {config_.window, config_.sigma};
      predictors_.push_back(std::move(pred));
    }
  }
  if (config_.variant == Variant::kRefsr) {
    gate_u_ = params_.add("gate.u", xavier_uniform(d, 1, rng));
    gate_w_ = params_.add("gate.w", xavier_uniform(d, 1, rng));
  }
}

Tensor Model::residual_dropout(Tape& tape, const Tensor& x, const EncodeOptions& opts) const {
  if (!opts.train || config_.dropout == 0) return x;
  if (!opts.rng) throw std::invalid_argument("training forward pass needs a random generator");
  return ops::dropout(tape, x, config_.dropout, *opts.rng);
}

Tensor Model::embed(Tape& tape, const Tensor& table, const PackedSequences& seq, const EncodeOptions& opts) const {
  for (auto len : seq.lengths)
    if (len > config_.max_len)
      throw std::invalid_argument("sentence of length " + std::to_string(len) + " exceeds max_len " +
                                  std::to_string(config_.max_len));
  const std::size_t d = config_.d_model;
  Tensor x = ops::scale(tape, ops::gather_rows(tape, table, seq.ids), std::sqrt(static_cast<double>(d)));
  Tensor pe(Shape{seq.rows(), d});
  auto positions = seq.row_positions();
  for (std::size_t i = 0; i < positions.size(); ++i) {
    auto row = table_.row(positions[i]);
    std::copy(row.begin(), row.end(), pe.data().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return residual_dropout(tape, ops::add(tape, x, pe), opts);
}

Tensor Model::encoder_layer(Tape& tape, std::size_t n, const Tensor& x, std::span<const AttentionSpan> spans,
                            const EncodeOptions& opts) const {
  const EncoderLayer& l = encoder_.at(n);
  AttentionOptions ao{config_.heads, false, opts.train ? config_.dropout : 0.0, opts.rng};
  Tensor att = multi_head_attention(tape, l.self, x, x, spans, ao);
  Tensor c = ops::layer_norm(tape, ops::add(tape, residual_dropout(tape, att, opts), x), l.ln1_g, l.ln1_b);
  Tensor f = ffn(tape, c, l.ff_w1, l.ff_b1, l.ff_w2, l.ff_b2);
  return ops::layer_norm(tape, ops::add(tape, residual_dropout(tape, f, opts), c), l.ln2_g, l.ln2_b);
}

EncoderState Model::encode(Tape& tape, const PackedSequences& src, const EncodeOptions& opts) const {
  switch (config_.variant) {
    case Variant::kBaseline: return encode_baseline(tape, src, opts);
    case Variant::kExgre: return encode_exgre(tape, src, opts);
    case Variant::kRefsr: return encode_refsr(tape, src, opts);
  }
  throw std::logic_error("unreachable");
}

EncoderState Model::encode_baseline(Tape& tape, const PackedSequences& src, const EncodeOptions& opts) const {
  EncoderState st;
  st.row_lengths = src.row_lengths();
  const auto spans = self_spans(src);
  Tensor h = embed(tape, src_embed_, src, opts);
  for (std::size_t n = 0; n < encoder_.size(); ++n) {
    h = encoder_layer(tape, n, h, spans, opts);
    st.hidden.push_back(h);
  }
  st.output = h;
  return st;
}

EncoderState Model::encode_exgre(Tape& tape, const PackedSequences& src, const EncodeOptions& opts) const {
  if (predictors_.empty()) throw std::logic_error("encode_exgre on a model without reordering parameters");
  EncoderState st;
  st.row_lengths = src.row_lengths();
  const auto spans = self_spans(src);
  Tensor h = embed(tape, src_embed_, src, opts);
  for (std::size_t n = 0; n < encoder_.size(); ++n) {
    Tensor sub = encoder_layer(tape, n, h, spans, opts);
    st.hidden.push_back(sub);
    Tensor b;
    if (opts.forced_positions) {
      if (opts.forced_positions->size() != src.rows())
        throw std::invalid_argument("forced_positions needs one value per source row");
      b = Tensor(Shape{src.rows(), 1}, *opts.forced_positions);
    } else {
      b = predict_positions(tape, sub, predictors_[n], st.row_lengths);
    }
    Tensor pr = gaussian_reorder(tape, b, table_, st.row_lengths, predictors_[n].window);
    st.positions.push_back(b);
    st.reordered.push_back(pr);
    h = inject_reordering(tape, sub, pr);
  }
  st.final_reordered = st.reordered.back();
  st.output = h;
  return st;
}

EncoderState Model::encode_refsr(Tape& tape, const PackedSequences& src, const EncodeOptions& opts) const {
  if (!gate_u_.defined()) throw std::logic_error("encode_refsr on a model without gate parameters");
  EncoderState base = encode_baseline(tape, src, opts);
  EncoderState st = encode_exgre(tape, src, opts);
  const Tensor& h = base.output;
  const Tensor& hr = st.output;
  Tensor g;
  if (opts.forced_gate) {
    g = Tensor(Shape{src.rows(), 1}, *opts.forced_gate);
  } else {
    g = ops::sigmoid(tape, ops::add(tape, ops::matmul(tape, h, gate_u_), ops::matmul(tape, hr, gate_w_)));
  }
  Tensor fused = ops::add(tape, ops::mul_col(tape, hr, g), ops::mul_col(tape, h, ops::affine(tape, g, -1.0, 1.0)));
  st.baseline_output = h;
  st.reordered_output = hr;
  st.gate = g;
  st.output = fused;
  return st;
}

Tensor Model::decode(Tape& tape, const Tensor& memory, std::span<const std::size_t> memory_offsets,
                     std::span<const std::size_t> memory_lengths, const PackedSequences& tgt_in,
                     const EncodeOptions& opts) const {
  if (memory.rank() != 2 || memory.cols() != config_.d_model)
    throw std::invalid_argument("decode: memory must be [rows x d_model], got " + shape_str(memory.shape()));
  if (memory_offsets.size() != tgt_in.sentences() || memory_lengths.size() != tgt_in.sentences())
    throw std::invalid_argument("decode: one memory span per target sentence required");
  const auto self = self_spans(tgt_in);
  std::vector<AttentionSpan> cross;
  cross.reserve(tgt_in.sentences());
  for (std::size_t i = 0; i < tgt_in.sentences(); ++i)
    cross.push_back({tgt_in.offsets[i], tgt_in.lengths[i], memory_offsets[i], memory_lengths[i]});
  const double drop = opts.train ? config_.dropout : 0.0;
  Tensor x = embed(tape, tgt_embed_, tgt_in, opts);
  for (const auto& l : decoder_) {
    Tensor a = multi_head_attention(tape, l.self, x, x, self, {config_.heads, true, drop, opts.rng});
    x = ops::layer_norm(tape, ops::add(tape, residual_dropout(tape, a, opts), x), l.ln1_g, l.ln1_b);
    Tensor c = multi_head_attention(tape, l.cross, x, memory, cross, {config_.heads, false, drop, opts.rng});
    x = ops::layer_norm(tape, ops::add(tape, residual_dropout(tape, c, opts), x), l.ln2_g, l.ln2_b);
    Tensor f = ffn(tape, x, l.ff_w1, l.ff_b1, l.ff_w2, l.ff_b2);
    x = ops::layer_norm(tape, ops::add(tape, residual_dropout(tape, f, opts), x), l.ln3_g, l.ln3_b);
  }
  return ops::linear(tape, x, out_w_, out_b_);
}

Tensor Model::decode(Tape& tape, const EncoderState& enc, const PackedSequences& src, const PackedSequences& tgt_in,
                     const EncodeOptions& opts) const {
  if (src.sentences() != tgt_in.sentences())
    throw std::invalid_argument("decode: source and target batches differ in size");
  return decode(tape, enc.output, src.offsets, src.lengths, tgt_in, opts);
}

}  // namespace rnmt
