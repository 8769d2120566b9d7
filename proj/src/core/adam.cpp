#include "rnmt/adam.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rnmt {

Tensor& ParameterSet::add(std::string name, Tensor t) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  t.set_requires_grad();
  items_.emplace_back(std::move(name), std::move(t));
  return items_.back().second;
}

Tensor& ParameterSet::get(const std::string& name) {
  for (auto& [n, t] : items_)
    if (n == name) return t;
  throw std::out_of_range("unknown parameter: " + name);
}

const Tensor& ParameterSet::get(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return t;
  throw std::out_of_range("unknown parameter: " + name);
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(items_.begin(), items_.end(), [&](const auto& p) { return p.first == name; });
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : items_) n += t.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [_, t] : items_) t.zero_grad();
}

void adam_step(ParameterSet& params, AdamState& state, double lr, const AdamConfig& cfg) {
  auto& items = params.items();
  if (state.m.empty()) {
    for (const auto& [_, t] : items) {
      state.m.emplace_back(t.size(), 0.0);
      state.v.emplace_back(t.size(), 0.0);
    }
  }
  if (state.m.size() != items.size()) throw std::invalid_argument("adam_step: optimizer state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < items.size(); ++p) {
    Tensor& t = items[p].second;
    if (!t.has_grad()) continue;
    auto w = t.data();
    auto g = t.grad();
    auto& m = state.m[p];
    auto& v = state.v[p];
    if (m.size() != w.size()) throw std::invalid_argument("adam_step: state shape mismatch for " + items[p].first);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      w[i] -= lr * mh / (std::sqrt(vh) + cfg.eps);
    }
  }
}

}  // namespace rnmt
