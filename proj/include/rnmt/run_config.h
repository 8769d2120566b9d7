#pragma once

#include <filesystem>
#include <string>

#include "rnmt/model.h"
#include "rnmt/trainer.h"

namespace rnmt {

// Every model and training key in one flat `key = value` namespace.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  // Unknown keys and unparsable values are ConfigError.
  void set(const std::string& key, const std::string& value);
  void load(const std::filesystem::path& path);
  // "key=value" override.
  void apply(const std::string& assignment);

  // Sorted key = value lines.
  std::string resolved() const;
};

}  // namespace rnmt
