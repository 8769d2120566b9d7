#pragma once

#include <functional>
#include <vector>

#include "rnmt/tensor.h"

namespace rnmt {

double relative_error(double analytic, double numeric, double floor = 1e-6);

// Worst relative error between tape gradients and central differences over
// every entry of every input. loss_fn must build a scalar from the inputs.
double gradient_check(const std::function<Tensor(Tape&)>& loss_fn, const std::vector<Tensor>& inputs,
                      double eps = 1e-5, double floor = 1e-6);

}  // namespace rnmt
