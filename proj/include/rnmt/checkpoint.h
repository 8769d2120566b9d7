#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rnmt/model.h"
#include "rnmt/vocab.h"

namespace rnmt {

// Binary container, little-endian:
//   "RNMTCKPT" | u32 version | u64 step
//   | u64 n + n bytes: model config as key = value lines
//   | u64 n + n bytes: source vocabulary, one token per line
//   | u64 n + n bytes: target vocabulary, one token per line
//   | u32 tensor count
//   | per tensor: u32 name length, name, u32 rank, u64 dims[rank], f64 values
constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t step = 0;
  ModelConfig config;
  Vocab src_vocab;
  Vocab tgt_vocab;
  std::vector<NamedTensor> tensors;
};

Checkpoint snapshot(const Model& model, const Vocab& src_vocab, const Vocab& tgt_vocab, std::uint64_t step);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Builds a model from the config and overwrites every parameter by name.
std::unique_ptr<Model> restore_model(const Checkpoint& ckpt);
void load_parameters(Model& model, const Checkpoint& ckpt);

// Elementwise mean of every parameter; configs and names must agree.
Checkpoint average_checkpoints(std::span<const Checkpoint> checkpoints);
Checkpoint average_checkpoints(std::span<const std::filesystem::path> paths);

}  // namespace rnmt
