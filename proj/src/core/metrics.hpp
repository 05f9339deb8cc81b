#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace mc::metrics {

struct EditStats {
  int64_t sub = 0;
  int64_t del = 0;  // reference tokens missing from the hypothesis
  int64_t ins = 0;  // extra hypothesis tokens
  int64_t total() const { return sub + del + ins; }
  // Denominator clamped to 1 so an empty reference cannot divide by zero.
  double wer(int64_t ref_len) const {
    return static_cast<double>(total()) / static_cast<double>(ref_len < 1 ? 1 : ref_len);
  }
};

// Levenshtein alignment with unit costs, plus the operation breakdown from
// the backtrace.
EditStats edit_distance(const std::vector<int64_t>& hyp,
                        const std::vector<int64_t>& ref);

// Independent oracle: plain memoized recursion, distance only.
int64_t edit_distance_oracle(const std::vector<int64_t>& hyp,
                             const std::vector<int64_t>& ref);

struct TimingRow {
  std::string strategy;
  double wall_seconds = 0.0;
  int64_t decoder_forwards = 0;
  int64_t encoder_forwards = 0;
};

struct StrategySummary {
  std::string strategy;
  int64_t n = 0;
  double mean_wall = 0.0;
  double median_wall = 0.0;
  double std_wall = 0.0;
  double total_wall = 0.0;
  int64_t decoder_forwards = 0;
  int64_t encoder_forwards = 0;
};

// One summary per strategy, in first-appearance order.
std::vector<StrategySummary> summarize_timings(const std::vector<TimingRow>& rows);
std::string timing_report_json(const std::vector<StrategySummary>& summaries);
std::string timing_report_table(const std::vector<StrategySummary>& summaries);

}  // namespace mc::metrics
