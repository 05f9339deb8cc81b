#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace mc::metrics {

EditStats edit_distance(const std::vector<int64_t>& hyp,
                        const std::vector<int64_t>& ref) {
  const size_t h = hyp.size(), r = ref.size();
  // dp[i][j]: distance between hyp[0..i) and ref[0..j)
  std::vector<std::vector<int64_t>> dp(h + 1, std::vector<int64_t>(r + 1, 0));
  for (size_t i = 0; i <= h; ++i) dp[i][0] = static_cast<int64_t>(i);
  for (size_t j = 0; j <= r; ++j) dp[0][j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= h; ++i)
    for (size_t j = 1; j <= r; ++j) {
      const int64_t match = dp[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1] ? 1 : 0);
      dp[i][j] = std::min({match, dp[i - 1][j] + 1, dp[i][j - 1] + 1});
    }

  EditStats stats;
  size_t i = h, j = r;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && dp[i][j] == dp[i - 1][j - 1] && hyp[i - 1] == ref[j - 1]) {
      --i, --j;
    } else if (i > 0 && j > 0 && dp[i][j] == dp[i - 1][j - 1] + 1) {
      ++stats.sub, --i, --j;
    } else if (i > 0 && dp[i][j] == dp[i - 1][j] + 1) {
      ++stats.ins, --i;  // extra hypothesis token
    } else {
      ++stats.del, --j;  // missed reference token
    }
  }
  return stats;
}

int64_t edit_distance_oracle(const std::vector<int64_t>& hyp,
                             const std::vector<int64_t>& ref) {
  const size_t h = hyp.size(), r = ref.size();
  std::vector<int64_t> memo((h + 1) * (r + 1), -1);
  auto solve = [&](auto&& self, size_t i, size_t j) -> int64_t {
    if (i == 0) return static_cast<int64_t>(j);
    if (j == 0) return static_cast<int64_t>(i);
    int64_t& slot = memo[i * (r + 1) + j];
    if (slot >= 0) return slot;
    const int64_t diag = self(self, i - 1, j - 1) + (hyp[i - 1] != ref[j - 1] ? 1 : 0);
    const int64_t up = self(self, i - 1, j) + 1;
    const int64_t left = self(self, i, j - 1) + 1;
    return slot = std::min({diag, up, left});
  };
  return solve(solve, h, r);
}

std::vector<StrategySummary> summarize_timings(const std::vector<TimingRow>& rows) {
  std::vector<StrategySummary> out;
  auto find = [&](const std::string& strategy) -> StrategySummary& {
    for (auto& s : out)
      if (s.strategy == strategy) return s;
    out.push_back({});
    out.back().strategy = strategy;
    return out.back();
  };

  std::vector<std::pair<std::string, std::vector<double>>> walls;
  for (const auto& row : rows) {
    auto& s = find(row.strategy);
    ++s.n;
    s.total_wall += row.wall_seconds;
    s.decoder_forwards += row.decoder_forwards;
    s.encoder_forwards += row.encoder_forwards;
    bool found = false;
    for (auto& [name, v] : walls)
      if (name == row.strategy) {
        v.push_back(row.wall_seconds);
        found = true;
      }
    if (!found) walls.push_back({row.strategy, {row.wall_seconds}});
  }

  for (auto& s : out) {
    std::vector<double>* v = nullptr;
    for (auto& [name, w] : walls)
      if (name == s.strategy) v = &w;
    s.mean_wall = s.total_wall / static_cast<double>(s.n);
    double var = 0.0;
    for (double w : *v) var += (w - s.mean_wall) * (w - s.mean_wall);
    s.std_wall = std::sqrt(var / static_cast<double>(s.n));
    std::sort(v->begin(), v->end());
    const size_t mid = v->size() / 2;
    s.median_wall = v->size() % 2 == 1 ? (*v)[mid] : 0.5 * ((*v)[mid - 1] + (*v)[mid]);
  }
  return out;
}

std::string timing_report_json(const std::vector<StrategySummary>& summaries) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : summaries) {
    j.push_back({{"strategy", s.strategy},
                 {"n", s.n},
                 {"mean_wall_seconds", s.mean_wall},
                 {"median_wall_seconds", s.median_wall},
                 {"std_wall_seconds", s.std_wall},
                 {"total_wall_seconds", s.total_wall},
                 {"decoder_forwards", s.decoder_forwards},
                 {"encoder_forwards", s.encoder_forwards}});
  }
  return j.dump(2);
}

std::string timing_report_table(const std::vector<StrategySummary>& summaries) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "strategy" << std::right << std::setw(6) << "n"
     << std::setw(14) << "mean_s" << std::setw(14) << "median_s" << std::setw(12)
     << "std_s" << std::setw(12) << "dec_fwd" << std::setw(12) << "enc_fwd" << "\n";
  for (const auto& s : summaries) {
    os << std::left << std::setw(16) << s.strategy << std::right << std::setw(6) << s.n
       << std::setw(14) << std::fixed << std::setprecision(6) << s.mean_wall
       << std::setw(14) << s.median_wall << std::setw(12) << s.std_wall
       << std::setw(12) << s.decoder_forwards << std::setw(12) << s.encoder_forwards
       << "\n";
  }
  return os.str();
}

}  // namespace mc::metrics
