#pragma once

#include <cstddef>

namespace rnmt {

struct ScheduleState {
  std::size_t step = 1;
  std::size_t warmup = 400;
  std::size_t d_model = 64;
  double scale = 1.0;
};

// scale * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5); step 0 is rejected.
double lr_at(std::size_t step, const ScheduleState& schedule);
inline double lr_at(const ScheduleState& s) { return lr_at(s.step, s); }

}  // namespace rnmt
