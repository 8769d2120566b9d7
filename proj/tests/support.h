#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "rnmt/gradcheck.h"
#include "rnmt/tensor.h"

namespace rnmt::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

inline Tensor param(Tensor t) {
  t.set_requires_grad();
  return t;
}

using rnmt::gradient_check;
using rnmt::relative_error;

}  // namespace rnmt::testing
