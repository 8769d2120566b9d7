#include "rnmt/trainer.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rnmt/bleu.h"
#include "rnmt/error.h"
#include "rnmt/kv.h"
#include "rnmt/search.h"
#include "rnmt/sim_metric.h"

namespace rnmt {

void TrainConfig::validate() const {
  if (steps == 0) throw ConfigError("steps must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (warmup == 0) throw ConfigError("warmup must be >= 1");
  if (label_smoothing < 0 || label_smoothing >= 1) throw ConfigError("label_smoothing must be in [0,1)");
  if (log_every == 0) throw ConfigError("log_every must be >= 1");
  if (average_last == 0) throw ConfigError("average_last must be >= 1");
  if (lr_scale <= 0) throw ConfigError("lr_scale must be positive");
}

std::map<std::string, std::string> TrainConfig::to_kv() const {
  return {{"steps", kv::format(steps)},
          {"batch_size", kv::format(batch_size)},
          {"warmup", kv::format(warmup)},
          {"lr_scale", kv::format(lr_scale)},
          {"label_smoothing", kv::format(label_smoothing)},
          {"log_every", kv::format(log_every)},
          {"valid_sentences", kv::format(valid_sentences)},
          {"save_every", kv::format(save_every)},
          {"average_last", kv::format(average_last)}};
}

bool TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "steps") steps = kv::parse_size(key, value);
  else if (key == "batch_size") batch_size = kv::parse_size(key, value);
  else if (key == "warmup") warmup = kv::parse_size(key, value);
  else if (key == "lr_scale") lr_scale = kv::parse_double(key, value);
  else if (key == "label_smoothing") label_smoothing = kv::parse_double(key, value);
  else if (key == "log_every") log_every = kv::parse_size(key, value);
  else if (key == "valid_sentences") valid_sentences = kv::parse_size(key, value);
  else if (key == "save_every") save_every = kv::parse_size(key, value);
  else if (key == "average_last") average_last = kv::parse_size(key, value);
  else return false;
  return true;
}

std::string metrics_header() { return "#step\tlr\tnll\treorder_sim\tvalid_bleu\tvalid_sim"; }

std::string format_metrics(const MetricsRow& r) {
  std::ostringstream os;
  os.precision(6);
  os << r.step << '\t' << r.lr << '\t' << r.nll << '\t' << r.reorder_sim << '\t' << r.valid_bleu << '\t';
  if (std::isnan(r.valid_sim)) os << "nan";
  else os << r.valid_sim;
  return os.str();
}

std::vector<Example> encode_corpus(const Corpus& corpus, const Vocab& src_vocab, const Vocab& tgt_vocab) {
  std::vector<Example> out;
  out.reserve(corpus.size());
  for (const auto& r : corpus) out.push_back({src_vocab.encode(r.src), tgt_vocab.encode(r.tgt), r.reordered_positions});
  return out;
}

TrainData prepare_data(const Corpus& train, const Corpus& valid) {
  std::vector<Tokens> src, tgt;
  for (const auto& r : train) {
    src.push_back(r.src);
    tgt.push_back(r.tgt);
  }
  TrainData d;
  d.src_vocab = Vocab::build(src);
  d.tgt_vocab = Vocab::build(tgt);
  d.train = encode_corpus(train, d.src_vocab, d.tgt_vocab);
  d.valid = encode_corpus(valid, d.src_vocab, d.tgt_vocab);
  return d;
}

std::size_t decode_limit(std::size_t src_len, std::size_t model_max_len) {
  return std::min(model_max_len, 2 * src_len + 10);
}

Trainer::Trainer(Model& model, const TrainConfig& cfg)
    : model_(model), cfg_(cfg), dropout_rng_(model.config().seed ^ 0x9e3779b97f4a7c15ull) {
  cfg_.validate();
}

Trainer::StepResult Trainer::step(const Batch& batch) {
  Tape tape;
  LossOptions lo;
  lo.lambda = model_.config().lambda;
  lo.smoothing = cfg_.label_smoothing;
  lo.encode.train = true;
  lo.encode.rng = &dropout_rng_;
  LossTerms terms = total_loss(tape, model_, batch, lo);
  model_.params().zero_grad();
  tape.backward(terms.total);
  ScheduleState sched{static_cast<std::size_t>(adam_.step + 1), cfg_.warmup, model_.config().d_model, cfg_.lr_scale};
  const double lr = lr_at(sched);
  adam_step(model_.params(), adam_, lr);
  StepResult r;
  r.loss = terms.total.item();
  r.nll = terms.nll.item();
  r.reorder = terms.reorder.defined() ? terms.reorder.item() : 0.0;
  r.lr = lr;
  return r;
}

namespace {

struct Validation {
  double bleu = 0;
  double sim = std::nan("");
};

Validation validate_model(const Model& model, const TrainData& data, std::size_t limit) {
  Validation v;
  const std::size_t n = std::min(limit, data.valid.size());
  if (n == 0) return v;
  std::span<const Example> subset(data.valid.data(), n);
  std::vector<std::vector<std::int32_t>> sources;
  std::size_t longest = 0;
  for (const auto& ex : subset) {
    sources.push_back(ex.src);
    longest = std::max(longest, ex.src.size());
  }
  std::vector<Tokens> hyps, refs;
  // Decode in chunks so a single long prefix batch stays small.
  for (std::size_t start = 0; start < n; start += 64) {
    const std::size_t end = std::min(n, start + 64);
    auto out = greedy_decode_batch(model, std::span(sources).subspan(start, end - start),
                                   decode_limit(longest, model.config().max_len));
    for (std::size_t i = start; i < end; ++i) {
      hyps.push_back(data.tgt_vocab.decode(out[i - start].tokens));
      refs.push_back(data.tgt_vocab.decode(subset[i].tgt));
    }
  }
  v.bleu = corpus_bleu(hyps, refs);
  if (model.config().variant != Variant::kBaseline &&
      std::all_of(subset.begin(), subset.end(), [](const Example& e) { return e.positions.has_value(); }))
    v.sim = sim_metric(model, subset).reordered;
  return v;
}

void write_resolved_config(const ModelConfig& m, const TrainConfig& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  for (const auto& [k, v] : m.to_kv()) out << k << " = " << v << '\n';
  for (const auto& [k, v] : t.to_kv()) out << k << " = " << v << '\n';
}

}  // namespace

TrainResult train(const TrainData& data, const ModelConfig& model_cfg_in, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir, std::ostream* log) {
  cfg.validate();
  ModelConfig model_cfg = model_cfg_in;
  model_cfg.src_vocab = data.src_vocab.size();
  model_cfg.tgt_vocab = data.tgt_vocab.size();
  model_cfg.validate();
  if (data.train.empty()) throw DataError("training corpus is empty");
  if (model_cfg.lambda > 0) {
    if (model_cfg.variant == Variant::kBaseline)
      throw ConfigError("lambda > 0 requires the exgre or refsr variant");
    for (const auto& ex : data.train)
      if (!ex.positions) throw DataError("lambda > 0 but the training corpus has no position sequences");
  }
  for (const auto& ex : data.train)
    if (ex.src.size() > model_cfg.max_len || ex.tgt.size() + 1 > model_cfg.max_len)
      throw DataError("training sentence longer than max_len " + std::to_string(model_cfg.max_len));

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_resolved_config(model_cfg, cfg, out_dir / "config.resolved");
  }
  std::ofstream metrics_file;
  if (!out_dir.empty()) {
    metrics_file.open(out_dir / "metrics.tsv");
    metrics_file << metrics_header() << '\n';
  }
  if (log) *log << metrics_header() << '\n';

  Model model(model_cfg);
  Trainer trainer(model, cfg);
  std::mt19937_64 shuffle_rng(model_cfg.seed);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  const std::size_t save_every = cfg.save_every ? cfg.save_every : std::max<std::size_t>(1, cfg.steps / 50);
  std::deque<Checkpoint> snapshots;
  TrainResult result;
  double nll_acc = 0, reorder_acc = 0;
  std::size_t acc_n = 0;

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    std::vector<const Example*> batch_examples;
    while (batch_examples.size() < cfg.batch_size) {
      if (cursor >= order.size()) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        cursor = 0;
      }
      batch_examples.push_back(&data.train[order[cursor++]]);
      if (batch_examples.size() == data.train.size()) break;
    }
    Batch batch = make_batch(batch_examples);
    auto r = trainer.step(batch);
    nll_acc += r.nll;
    reorder_acc += r.reorder;
    ++acc_n;

    if (step % cfg.log_every == 0 || step == cfg.steps) {
      MetricsRow row;
      row.step = step;
      row.lr = r.lr;
      row.nll = nll_acc / static_cast<double>(acc_n);
      row.reorder_sim = reorder_acc / static_cast<double>(acc_n);
      const auto v = validate_model(model, data, cfg.valid_sentences);
      row.valid_bleu = v.bleu;
      row.valid_sim = v.sim;
      result.metrics.push_back(row);
      const std::string line = format_metrics(row);
      if (metrics_file.is_open()) metrics_file << line << std::endl;
      if (log) *log << line << std::endl;
      nll_acc = reorder_acc = 0;
      acc_n = 0;
    }
    if (step % save_every == 0 || step == cfg.steps) {
      snapshots.push_back(snapshot(model, data.src_vocab, data.tgt_vocab, step));
      if (!out_dir.empty())
        save_checkpoint(snapshots.back(), out_dir / ("checkpoint_" + std::to_string(step) + ".bin"));
      while (snapshots.size() > cfg.average_last) snapshots.pop_front();
    }
  }
  std::vector<Checkpoint> last(snapshots.begin(), snapshots.end());
  result.final_checkpoint = average_checkpoints(last);
  if (!out_dir.empty()) save_checkpoint(result.final_checkpoint, out_dir / "model.bin");
  return result;
}

}  // namespace rnmt
