#include "rnmt/gradcheck.h"

#include <algorithm>
#include <cmath>

namespace rnmt {

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

double gradient_check(const std::function<Tensor(Tape&)>& loss_fn, const std::vector<Tensor>& inputs, double eps,
                      double floor) {
  for (const auto& t : inputs) t.zero_grad();
  {
    Tape tape;
    Tensor loss = loss_fn(tape);
    tape.backward(loss);
  }
  double worst = 0.0;
  for (auto t : inputs) {
    std::vector<double> analytic(t.size(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double keep = t[i];
      Tape probe(Tape::Mode::kInference);
      t[i] = keep + eps;
      const double up = loss_fn(probe).item();
      t[i] = keep - eps;
      const double down = loss_fn(probe).item();
      t[i] = keep;
      worst = std::max(worst, relative_error(analytic[i], (up - down) / (2 * eps), floor));
    }
  }
  return worst;
}

}  // namespace rnmt
