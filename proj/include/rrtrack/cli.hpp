#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rrtrack {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the command-line tool. `args` excludes the program name.
/// Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct BenchReport {
  std::vector<double> latency_ms;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double fps = 0.0;
};

BenchReport summarize_latencies(std::vector<double> latency_ms);

}  // namespace rrtrack
