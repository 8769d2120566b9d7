#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rnmt/alignment.h"

namespace rnmt {

// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitRuntime = 3 };

// Runs one command; args exclude the program name. Tables and stats go to
// `out`, diagnostics and the resolved config to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct OrderStats {
  std::size_t sentences = 0;
  double mean_tau = 0.0;
  std::array<std::size_t, 10> histogram{};  // bins of width 0.1, the last one closed
};

OrderStats order_stats(std::span<const PositionSequence> positions);
void print_order_stats(const OrderStats& stats, std::ostream& out);

}  // namespace rnmt
