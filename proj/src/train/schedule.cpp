#include "rnmt/schedule.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rnmt {

double lr_at(std::size_t step, const ScheduleState& schedule) {
  if (step == 0) throw std::invalid_argument("learning-rate schedule is defined for step >= 1");
  if (schedule.warmup == 0 || schedule.d_model == 0) throw std::invalid_argument("warmup and d_model must be positive");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(schedule.warmup);
  return schedule.scale / std::sqrt(static_cast<double>(schedule.d_model)) *
         std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5));
}

}  // namespace rnmt
