#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rnmt/adam.h"
#include "rnmt/batch.h"
#include "rnmt/checkpoint.h"
#include "rnmt/corpus.h"
#include "rnmt/loss.h"
#include "rnmt/model.h"
#include "rnmt/schedule.h"
#include "rnmt/vocab.h"

namespace rnmt {

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 32;
  std::size_t warmup = 400;
  double lr_scale = 1.0;
  double label_smoothing = 0.1;
  std::size_t log_every = 100;
  std::size_t valid_sentences = 200;  // validation subset decoded at each log line
  std::size_t save_every = 0;         // 0: steps / 50
  std::size_t average_last = 5;

  void validate() const;
  std::map<std::string, std::string> to_kv() const;
  bool set(const std::string& key, const std::string& value);
};

struct MetricsRow {
  std::size_t step = 0;
  double lr = 0;
  double nll = 0;
  double reorder_sim = 0;  // mean per-sentence reordering term over the interval
  double valid_bleu = 0;
  double valid_sim = 0;    // NaN when not applicable
};

std::string metrics_header();
std::string format_metrics(const MetricsRow& row);

struct TrainData {
  std::vector<Example> train;
  std::vector<Example> valid;
  Vocab src_vocab;
  Vocab tgt_vocab;
};

// Builds vocabularies from the training side and tokenises both splits.
TrainData prepare_data(const Corpus& train, const Corpus& valid);
std::vector<Example> encode_corpus(const Corpus& corpus, const Vocab& src_vocab, const Vocab& tgt_vocab);

// One optimisation step at a time over a model it does not own.
class Trainer {
 public:
  Trainer(Model& model, const TrainConfig& cfg);

  struct StepResult {
    double loss = 0;
    double nll = 0;
    double reorder = 0;
    double lr = 0;
  };
  StepResult step(const Batch& batch);
  std::size_t steps_done() const { return static_cast<std::size_t>(adam_.step); }

 private:
  Model& model_;
  TrainConfig cfg_;
  AdamState adam_;
  std::mt19937_64 dropout_rng_;
};

struct TrainResult {
  Checkpoint final_checkpoint;  // average of the last `average_last` snapshots
  std::vector<MetricsRow> metrics;
};

// Full loop: seeded shuffling, Adam + warmup schedule, periodic metrics and
// snapshots. With a non-empty out_dir writes checkpoint_<step>.bin files,
// model.bin (averaged), metrics.tsv and config.resolved. Progress lines go to
// `log` when given.
TrainResult train(const TrainData& data, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir = {}, std::ostream* log = nullptr);

// Decoding length cap used for validation and translation.
std::size_t decode_limit(std::size_t src_len, std::size_t model_max_len);

}  // namespace rnmt
