#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rnmt/tensor.h"

namespace rnmt {

// Ordered, named collection of trainable tensors. Order is insertion order and
// is the order used for checkpoints and optimizer state.
class ParameterSet {
 public:
  Tensor& add(std::string name, Tensor t);
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t count() const;  // total scalar parameters
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

// One bias-corrected Adam update over every parameter that carries a gradient.
// Parameters without a gradient buffer are treated as having zero gradient.
void adam_step(ParameterSet& params, AdamState& state, double lr, const AdamConfig& cfg = {});

}  // namespace rnmt
