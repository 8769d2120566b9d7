#include "rnmt/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "rnmt/bleu.h"
#include "rnmt/checkpoint.h"
#include "rnmt/corpus.h"
#include "rnmt/error.h"
#include "rnmt/kv.h"
#include "rnmt/run_config.h"
#include "rnmt/sim_metric.h"
#include "rnmt/synth.h"
#include "rnmt/trainer.h"
#include "rnmt/translate.h"

namespace rnmt {

OrderStats order_stats(std::span<const PositionSequence> positions) {
  OrderStats st;
  st.sentences = positions.size();
  double sum = 0;
  for (const auto& r : positions) {
    const double tau = kendall_tau_distance(r);
    sum += tau;
    st.histogram[std::min<std::size_t>(9, static_cast<std::size_t>(tau * 10.0))]++;
  }
  st.mean_tau = positions.empty() ? 0.0 : sum / static_cast<double>(positions.size());
  return st;
}

void print_order_stats(const OrderStats& st, std::ostream& out) {
  out << "sentences\t" << st.sentences << '\n';
  out << "mean_kendall_tau\t" << std::fixed << std::setprecision(6) << st.mean_tau << '\n';
  out << std::setprecision(1);
  for (std::size_t b = 0; b < st.histogram.size(); ++b)
    out << "tau[" << static_cast<double>(b) / 10 << ',' << static_cast<double>(b + 1) / 10 << (b == 9 ? "]" : ")")
        << '\t' << st.histogram[b] << '\n';
  out << std::defaultfloat << std::setprecision(6);
}

namespace {

struct ConfigFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "override a config key, key=value");
    cmd->add_option("--seed", seed, "random seed");
  }

  RunConfig resolve() const {
    RunConfig rc;
    if (!config.empty()) rc.load(config);
    for (const auto& o : overrides) rc.apply(o);
    if (seed) rc.model.seed = *seed;
    return rc;
  }
};

std::filesystem::path with_ext(const std::string& prefix, const char* ext) { return prefix + ext; }

// PREFIX.src / PREFIX.tgt and, when present, PREFIX.pos.
Corpus load_split(const std::string& prefix) {
  Corpus c = read_parallel(with_ext(prefix, ".src"), with_ext(prefix, ".tgt"));
  if (std::filesystem::exists(with_ext(prefix, ".pos"))) attach_positions(c, read_positions(with_ext(prefix, ".pos")));
  return c;
}

std::vector<Tokens> sources_of(const Corpus& c) {
  std::vector<Tokens> s;
  for (const auto& r : c) s.push_back(r.src);
  return s;
}

std::vector<Tokens> targets_of(const Corpus& c) {
  std::vector<Tokens> s;
  for (const auto& r : c) s.push_back(r.tgt);
  return s;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

struct EvalResult {
  double bleu = 0;
  double sim = std::nan("");
};

EvalResult evaluate(const Checkpoint& ckpt, const Corpus& test, const DecodeSettings& decode) {
  auto model = restore_model(ckpt);
  EvalResult r;
  const auto hyps = translate(*model, ckpt.src_vocab, ckpt.tgt_vocab, sources_of(test), decode);
  r.bleu = corpus_bleu(hyps, targets_of(test));
  if (ckpt.config.variant != Variant::kBaseline && has_positions(test)) {
    const auto examples = encode_corpus(test, ckpt.src_vocab, ckpt.tgt_vocab);
    r.sim = sim_metric(*model, examples).reordered;
  }
  return r;
}

int cmd_preprocess(const std::string& src, const std::string& tgt, const std::string& align, const std::string& out_dir,
                   bool target_first, std::ostream& out) {
  Corpus corpus = read_parallel(src, tgt);
  auto reordered = reorder_corpus(std::move(corpus), read_lines(align), target_first);
  std::vector<PositionSequence> positions;
  for (const auto& r : reordered.corpus) positions.push_back(*r.reordered_positions);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  write_token_file(dir / "source.reordered", reordered.reordered_source);
  write_positions(positions, dir / "source.pos");
  const auto st = order_stats(positions);
  std::ofstream stats(dir / "stats.txt");
  print_order_stats(st, stats);
  print_order_stats(st, out);
  return kExitOk;
}

void write_split(const Corpus& c, const std::filesystem::path& dir, const std::string& name) {
  write_parallel(c, dir / (name + ".src"), dir / (name + ".tgt"));
  write_alignments(c, dir / (name + ".align"));
  std::vector<PositionSequence> pos;
  for (const auto& r : c) pos.push_back(*r.reordered_positions);
  write_positions(pos, dir / (name + ".pos"));
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(kv::parse_double("list", item));
  if (v.empty()) throw ConfigError("empty list '" + text + "'");
  return v;
}

TrainData load_train_data(const std::string& train_prefix, const std::string& valid_prefix) {
  Corpus train = load_split(train_prefix);
  Corpus valid = valid_prefix.empty() ? Corpus{} : load_split(valid_prefix);
  return prepare_data(train, valid);
}

int cmd_sweep(const RunConfig& base, const std::string& train_prefix, const std::string& valid_prefix,
              const std::string& test_prefix, const std::string& out_dir, const std::vector<double>& lambdas,
              std::size_t jobs, const DecodeSettings& decode, std::ostream& out, std::ostream& err) {
  if (base.model.variant == Variant::kBaseline) throw ConfigError("sweep-lambda needs variant = exgre or refsr");
  const TrainData data = load_train_data(train_prefix, valid_prefix);
  const Corpus test = load_split(test_prefix);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  std::ofstream table(dir / "results.tsv");
  table << "lambda\tbleu\tsim" << std::endl;

  std::map<std::size_t, EvalResult> done;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::optional<std::string> failure;
  auto worker = [&]() {
    for (std::size_t i = next++; i < lambdas.size(); i = next++) {
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      try {
        RunConfig rc = base;
        rc.model.lambda = lambdas[i];
        std::ostringstream tag;
        tag << "lambda_" << lambdas[i];
        auto trained = train(data, rc.model, rc.train, dir / tag.str());
        const auto r = evaluate(trained.final_checkpoint, test, decode);
        std::lock_guard lock(mu);
        done[i] = r;
        table << lambdas[i] << '\t' << fixed(r.bleu, 2) << '\t' << fixed(r.sim, 4) << std::endl;
        err << "lambda " << lambdas[i] << " done\n";
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        if (!failure) failure = "lambda " + std::to_string(lambdas[i]) + ": " + e.what();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::max<std::size_t>(1, jobs); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  out << "lambda\tbleu\tsim\n";
  for (const auto& [i, r] : done) out << lambdas[i] << '\t' << fixed(r.bleu, 2) << '\t' << fixed(r.sim, 4) << '\n';
  if (failure) throw std::runtime_error("sweep aborted, partial results kept in " + (dir / "results.tsv").string() +
                                        ": " + *failure);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Explicit-reordering NMT toolkit", "rnmt"};
  app.require_subcommand(1);

  std::string src, tgt, align, out_dir;
  bool target_first = false;
  auto* pre = app.add_subcommand("preprocess", "reorder a corpus by its word alignments");
  pre->add_option("--src", src, "source file")->required();
  pre->add_option("--tgt", tgt, "target file")->required();
  pre->add_option("--align", align, "Pharaoh alignment file")->required();
  pre->add_option("--out", out_dir, "output directory")->required();
  pre->add_flag("--target-first", target_first, "alignment pairs are tgt-src");

  SynthTaskSpec spec;
  std::string family = "blockSwap(3)+headFinal";
  std::size_t count = 21000;
  std::string ratios = "0.9,0.05,0.05";
  std::uint64_t seed = 1;
  auto* syn = app.add_subcommand("synth", "generate a synthetic reordering corpus");
  syn->add_option("--family", family, "permutation pipeline")->capture_default_str();
  syn->add_option("--vocab", spec.vocab)->capture_default_str();
  syn->add_option("--min-len", spec.min_len)->capture_default_str();
  syn->add_option("--max-len", spec.max_len)->capture_default_str();
  syn->add_option("--count", count)->capture_default_str();
  syn->add_option("--split", ratios, "train,valid,test ratios")->capture_default_str();
  syn->add_option("--seed", seed)->capture_default_str();
  syn->add_option("--out", out_dir)->required();

  ConfigFlags train_flags;
  std::string train_prefix, valid_prefix, test_prefix;
  auto* trn = app.add_subcommand("train", "train a model");
  train_flags.attach(trn);
  trn->add_option("--train", train_prefix, "PREFIX of .src/.tgt[/.pos]")->required();
  trn->add_option("--valid", valid_prefix, "validation PREFIX");
  trn->add_option("--out", out_dir)->required();

  std::string model_path, input, output;
  std::size_t beam = 5;
  bool greedy = false;
  auto* tr = app.add_subcommand("translate", "decode a source file");
  tr->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  tr->add_option("--input", input)->required();
  tr->add_option("--output", output, "defaults to stdout");
  tr->add_option("--beam", beam)->capture_default_str();
  tr->add_flag("--greedy", greedy);

  std::string hyp, ref;
  auto* sc = app.add_subcommand("score", "corpus BLEU");
  sc->add_option("--hyp", hyp)->required();
  sc->add_option("--ref", ref)->required();

  auto* sim = app.add_subcommand("sim", "similarity of reordered and supervised position embeddings");
  sim->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  sim->add_option("--test", test_prefix, "PREFIX of .src/.tgt/.pos")->required();

  ConfigFlags sweep_flags;
  std::string lambda_list = "0,0.2,0.4,0.6,0.8,1.0";
  std::size_t jobs = 1;
  auto* sw = app.add_subcommand("sweep-lambda", "train one model per reordering-loss weight");
  sweep_flags.attach(sw);
  sw->add_option("--train", train_prefix)->required();
  sw->add_option("--valid", valid_prefix);
  sw->add_option("--test", test_prefix)->required();
  sw->add_option("--out", out_dir)->required();
  sw->add_option("--lambdas", lambda_list)->capture_default_str();
  sw->add_option("--jobs", jobs, "parallel sub-runs")->capture_default_str();
  sw->add_option("--beam", beam)->capture_default_str();
  sw->add_flag("--greedy", greedy);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    if (*pre) return cmd_preprocess(src, tgt, align, out_dir, target_first, out);

    if (*syn) {
      spec.family = PermutationFamily::parse(family);
      spec.seed = seed;
      const auto r = parse_list(ratios);
      if (r.size() != 3) throw ConfigError("--split needs three ratios");
      const auto parts = split(generate(spec, count), r[0], r[1], r[2], seed);
      const std::filesystem::path dir(out_dir);
      std::filesystem::create_directories(dir);
      write_split(parts.train, dir, "train");
      if (!parts.valid.empty()) write_split(parts.valid, dir, "valid");
      if (!parts.test.empty()) write_split(parts.test, dir, "test");
      out << "train\t" << parts.train.size() << "\nvalid\t" << parts.valid.size() << "\ntest\t" << parts.test.size()
          << '\n';
      return kExitOk;
    }

    if (*trn) {
      RunConfig rc = train_flags.resolve();
      err << rc.resolved();
      const TrainData data = load_train_data(train_prefix, valid_prefix);
      train(data, rc.model, rc.train, out_dir, &out);
      return kExitOk;
    }

    if (*tr) {
      const Checkpoint ckpt = load_checkpoint(model_path);
      auto model = restore_model(ckpt);
      const auto hyps = translate(*model, ckpt.src_vocab, ckpt.tgt_vocab, read_token_file(input), {beam, greedy});
      if (output.empty()) {
        for (const auto& h : hyps) out << join_tokens(h) << '\n';
      } else {
        write_token_file(output, hyps);
      }
      return kExitOk;
    }

    if (*sc) {
      const auto h = read_token_file(hyp), r = read_token_file(ref);
      if (h.size() != r.size())
        throw DataError(std::to_string(h.size()) + " hypotheses vs " + std::to_string(r.size()) + " references");
      if (h.empty()) throw DataError("empty reference file");
      out << fixed(corpus_bleu(h, r), 2) << '\n';
      return kExitOk;
    }

    if (*sim) {
      const Checkpoint ckpt = load_checkpoint(model_path);
      auto model = restore_model(ckpt);
      const auto examples = encode_corpus(load_split(test_prefix), ckpt.src_vocab, ckpt.tgt_vocab);
      const auto r = sim_metric(*model, examples);
      out << "sim_pr\t" << fixed(r.reordered, 6) << "\nsim_pe\t" << fixed(r.positional, 6) << "\ntokens\t" << r.tokens
          << '\n';
      return kExitOk;
    }

    if (*sw) {
      RunConfig rc = sweep_flags.resolve();
      err << rc.resolved();
      return cmd_sweep(rc, train_prefix, valid_prefix, test_prefix, out_dir, parse_list(lambda_list), jobs,
                       {beam, greedy}, out, err);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace rnmt
