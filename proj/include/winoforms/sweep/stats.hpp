#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "winoforms/error.hpp"

namespace winoforms {

struct DistributionStats {
  std::size_t count = 0;
  double mean = 0.0;
  std::optional<double> std;       // n - 1 denominator; needs n >= 2
  std::optional<double> kurtosis;  // excess g2 = m4 / m2^2 - 3; needs n >= 4 and m2 > 0
  double median = 0.0;
  double p75 = 0.0;
  double max = 0.0;
};

// Linear interpolation between closest ranks, rank = 1 + (n - 1) q.
inline double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error("percentile: no data");
  if (q < 0.0 || q > 1.0) throw Error("percentile: q must lie in [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline DistributionStats distribution_stats(std::span<const double> values) {
  if (values.empty()) throw Error("distribution_stats: no values");
  DistributionStats s;
  s.count = values.size();
  const double n = static_cast<double>(s.count);
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  double m2 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = (v - s.mean) * (v - s.mean);
    m2 += d;
    m4 += d * d;
  }
  if (s.count >= 2) s.std = std::sqrt(m2 / (n - 1.0));
  m2 /= n;
  m4 /= n;
  // relative guard so that shifted constant samples count as zero variance
  const double scale = std::max(1.0, std::abs(s.mean));
  if (s.count >= 4 && m2 > 1e-24 * scale * scale) s.kurtosis = m4 / (m2 * m2) - 3.0;

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  s.median = percentile(sorted, 0.5);
  s.p75 = percentile(sorted, 0.75);
  s.max = sorted.back();
  return s;
}

}  // namespace winoforms
