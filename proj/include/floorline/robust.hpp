#pragma once

// Order statistics used by the elevation estimator and the report.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace floorline::robust {

/// Linearly interpolated quantile at position q*(n-1) of the sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return std::nan("");
  q = std::clamp(q, 0.0, 1.0);
  const double pos = q * double(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - double(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, q);
}

/// Even counts average the two central values.
inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

struct Fence {
  double lower;
  double upper;
};

/// [Q1 - k*IQR, Q3 + k*IQR].
inline Fence tukey_fence(std::vector<double> v, double k = 1.5) {
  std::sort(v.begin(), v.end());
  const double q1 = quantile_sorted(v, 0.25), q3 = quantile_sorted(v, 0.75);
  const double iqr = q3 - q1;
  return {q1 - k * iqr, q3 + k * iqr};
}

/// Drops values outside the two-sided Tukey fence. Never returns an empty
/// set: if everything would be fenced the input comes back unchanged.
inline std::vector<double> remove_outliers(const std::vector<double>& v, double k = 1.5) {
  if (v.size() < 2) return v;
  const auto f = tukey_fence(v, k);
  std::vector<double> kept;
  kept.reserve(v.size());
  for (double x : v)
    if (x >= f.lower && x <= f.upper) kept.push_back(x);
  return kept.empty() ? v : kept;
}

/// The ceil(fraction * n) smallest values, ascending.
inline std::vector<double> visibility_subset(std::vector<double> v, double fraction) {
  std::sort(v.begin(), v.end());
  if (fraction >= 1.0 || v.empty()) return v;
  auto keep = static_cast<std::size_t>(std::ceil(fraction * double(v.size()) - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, v.size());
  v.resize(keep);
  return v;
}

/// Values not above the median, ascending.
inline std::vector<double> below_median_subset(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return v;
  const double m = quantile_sorted(v, 0.5);
  v.erase(std::upper_bound(v.begin(), v.end(), m), v.end());
  return v;
}

}  // namespace floorline::robust
