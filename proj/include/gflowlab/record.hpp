#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

namespace gflowlab {

// One JSONL row of a training run.
struct MetricRecord {
  int round = 0;
  std::uint64_t trajectories_seen = 0;
  double loss = 0.0;                  // forward objective, mean over the interval
  std::optional<double> pbp_loss;     // mean over the interval
  std::optional<double> l1;
  std::uint64_t modes = 0;
  double top100 = 0.0;
  std::optional<double> relative_mean_error;
  std::optional<std::uint64_t> hamming_modes;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

// Keys in fixed order, floats with 9 significant digits, absent values as
// null, non-finite floats as null. No trailing newline.
std::string format_record(const MetricRecord& r);
// format_record plus LF. Throws Error when the stream fails.
void emit_record(std::ostream& sink, const MetricRecord& r);
// Inverse of format_record; throws DataError on malformed input.
MetricRecord parse_record(std::string_view line);

}  // namespace gflowlab
