#pragma once

// Evaluation statistics: MAE, the outlier fence, Kruskal-Wallis, paired t,
// HDSL summaries, the data funnel, and CSV / SVG exports.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "floorline/error.hpp"
#include "floorline/robust.hpp"

namespace floorline::report {

struct EvaluationRow {
  std::string house_id;
  double estimate = 0.0;
  double truth = 0.0;
  double error = 0.0;      // estimate - truth
  double abs_error = 0.0;
  std::string visibility;  // "complete" / "partial" / ""
  bool outlier = false;
};

inline EvaluationRow make_row(std::string id, double estimate, double truth, std::string visibility = {}) {
  EvaluationRow r;
  r.house_id = std::move(id);
  r.estimate = estimate;
  r.truth = truth;
  r.error = estimate - truth;
  r.abs_error = std::abs(r.error);
  r.visibility = std::move(visibility);
  return r;
}

struct MaeResult {
  double meters = 0.0;
  double percent_per_house = 0.0;   // mean of |error| / |truth|
  double percent_of_mean_truth = 0.0;  // mean |error| / mean |truth|
  std::size_t n = 0;
};

inline MaeResult mae(const std::vector<EvaluationRow>& rows) {
  if (rows.empty()) throw Error(ErrorCode::NoTruth, "no rows with ground truth");
  MaeResult m;
  m.n = rows.size();
  double sum_abs = 0, sum_rel = 0, sum_truth = 0;
  for (const auto& r : rows) {
    sum_abs += r.abs_error;
    sum_rel += r.abs_error / std::abs(r.truth);
    sum_truth += std::abs(r.truth);
  }
  m.meters = sum_abs / double(m.n);
  m.percent_per_house = 100.0 * sum_rel / double(m.n);
  m.percent_of_mean_truth = 100.0 * sum_abs / sum_truth;
  return m;
}

/// Upper fence Q3 + k*IQR of the absolute errors.
inline double outlier_threshold(const std::vector<EvaluationRow>& rows, double k = 1.5) {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.abs_error);
  std::sort(v.begin(), v.end());
  const double q1 = robust::quantile_sorted(v, 0.25), q3 = robust::quantile_sorted(v, 0.75);
  return q3 + k * (q3 - q1);
}

inline std::vector<EvaluationRow> flag_outliers(std::vector<EvaluationRow> rows, double k = 1.5) {
  if (rows.size() < 4) throw Error(ErrorCode::TooFewRows, "outlier fence needs at least 4 rows");
  const double t = outlier_threshold(rows, k);
  for (auto& r : rows) r.outlier = r.abs_error > t;
  return rows;
}

// ---------------------------------------------------------------------------
// Kruskal-Wallis

/// Average ranks (1-based) of the pooled values.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (double(i) + double(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

struct KruskalWallis {
  double h = 0.0;  // tie-corrected
  double p = 1.0;  // chi-squared approximation
  int df = 0;
  std::optional<double> p_exact;  // permutation p when enumerable
};

/// H over pooled ranks with the usual tie correction, given a group label
/// per pooled value.
inline double kw_statistic(const std::vector<double>& ranks, const std::vector<int>& label, int k, double tie_c) {
  std::vector<double> sum(k, 0.0);
  std::vector<int> n(k, 0);
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    sum[label[i]] += ranks[i];
    ++n[label[i]];
  }
  const double N = double(ranks.size());
  double s = 0;
  for (int g = 0; g < k; ++g) s += sum[g] * sum[g] / n[g];
  return (12.0 / (N * (N + 1.0)) * s - 3.0 * (N + 1.0)) / tie_c;
}

inline constexpr std::size_t kExactMaxN = 12;
inline constexpr double kExactMaxLabelings = 2e6;

inline KruskalWallis kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw Error(ErrorCode::DegenerateGroups, "need at least two groups");
  std::vector<double> pooled;
  std::vector<int> label;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw Error(ErrorCode::DegenerateGroups, "empty group");
    for (double x : groups[g]) {
      pooled.push_back(x);
      label.push_back(int(g));
    }
  }
  const std::size_t N = pooled.size();
  if (N < 3) throw Error(ErrorCode::DegenerateGroups, "need at least three values");
  if (std::all_of(pooled.begin(), pooled.end(), [&](double x) { return x == pooled[0]; }))
    throw Error(ErrorCode::DegenerateGroups, "all values identical");

  auto sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double ties = 0;
  for (std::size_t i = 0; i < N;) {
    std::size_t j = i;
    while (j < N && sorted[j] == sorted[i]) ++j;
    const double t = double(j - i);
    ties += t * t * t - t;
    i = j;
  }
  const double c = 1.0 - ties / (double(N) * double(N) * double(N) - double(N));
  const auto ranks = average_ranks(pooled);
  const int k = int(groups.size());

  KruskalWallis out;
  out.df = k - 1;
  out.h = std::max(0.0, kw_statistic(ranks, label, k, c));
  out.p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(out.df), out.h));

  if (N <= kExactMaxN) {
    double labelings = std::tgamma(double(N) + 1);
    for (const auto& g : groups) labelings /= std::tgamma(double(g.size()) + 1);
    if (labelings <= kExactMaxLabelings) {
      auto perm = label;
      std::sort(perm.begin(), perm.end());
      std::size_t total = 0, extreme = 0;
      do {
        ++total;
        if (kw_statistic(ranks, perm, k, c) >= out.h - 1e-9) ++extreme;
      } while (std::next_permutation(perm.begin(), perm.end()));
      out.p_exact = double(extreme) / double(total);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Paired t

struct PairedT {
  double t = 0.0;
  double p = 1.0;  // two-sided
  int df = 0;
  double mean_difference = 0.0;
};

inline PairedT paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DegeneratePairs, "series lengths differ");
  if (a.size() < 2) throw Error(ErrorCode::DegeneratePairs, "need at least two pairs");
  const double n = double(a.size());
  double mean = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  const double var = ss / (n - 1.0);
  if (!(var > 0)) throw Error(ErrorCode::DegeneratePairs, "differences have zero variance");
  PairedT r;
  r.df = int(a.size()) - 1;
  r.mean_difference = mean;
  r.t = mean / std::sqrt(var / n);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(r.df), std::abs(r.t)));
  return r;
}

// ---------------------------------------------------------------------------
// HDSL distribution

struct Distribution {
  std::vector<double> sorted;
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;

  double percentile(double p) const { return robust::quantile_sorted(sorted, p / 100.0); }

  /// Share of values strictly below `threshold`.
  double fraction_below(double threshold) const {
    return double(std::lower_bound(sorted.begin(), sorted.end(), threshold) - sorted.begin()) / double(sorted.size());
  }
};

inline Distribution hdsl_distribution(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::TooFewRows, "no HDSL values");
  Distribution d;
  std::sort(values.begin(), values.end());
  d.sorted = std::move(values);
  d.mean = std::accumulate(d.sorted.begin(), d.sorted.end(), 0.0) / double(d.sorted.size());
  d.median = robust::quantile_sorted(d.sorted, 0.5);
  d.min = d.sorted.front();
  d.max = d.sorted.back();
  return d;
}

// ---------------------------------------------------------------------------
// Funnel

/// Per-house filter outcomes, in pipeline order.
struct FunnelFlags {
  bool has_truth = false;
  bool has_image = false;
  bool door_visible = false;
  bool matched = false;         // image date compatible with the ground truth
  bool bottom_detected = false;
};

inline const char* const kFunnelSteps[5] = {
    "Houses with LFE ground truth",
    "Houses with a street view image",
    "Houses with a visible front door",
    "Houses with matched ground truth and image",
    "Houses with a detected door bottom",
};

/// Houses passing every step up to and including each step.
inline std::array<std::size_t, 5> funnel(const std::vector<FunnelFlags>& houses) {
  std::array<std::size_t, 5> counts{};
  for (const auto& h : houses) {
    const bool steps[5] = {h.has_truth, h.has_image, h.door_visible, h.matched, h.bottom_detected};
    for (int i = 0; i < 5 && steps[i]; ++i) ++counts[i];
  }
  return counts;
}

// ---------------------------------------------------------------------------
// Exports

inline std::string num(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline void write_rows_csv(std::ostream& out, const std::vector<EvaluationRow>& rows) {
  out << "house_id,estimate_m,truth_m,error_m,abs_error_m,visibility,outlier\n";
  for (const auto& r : rows)
    out << r.house_id << ',' << num(r.estimate) << ',' << num(r.truth) << ',' << num(r.error) << ','
        << num(r.abs_error) << ',' << r.visibility << ',' << (r.outlier ? 1 : 0) << '\n';
}

struct Histogram {
  std::vector<double> edges;  // bins + 1 edges
  std::vector<std::size_t> counts;
};

inline Histogram histogram(const std::vector<double>& values, int bins) {
  Histogram h;
  if (values.empty() || bins < 1) return h;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it, hi = *hi_it;
  if (hi == lo) { lo -= 0.5; hi += 0.5; }
  const double w = (hi - lo) / bins;
  for (int i = 0; i <= bins; ++i) h.edges.push_back(lo + w * i);
  h.counts.assign(bins, 0);
  for (double v : values) ++h.counts[std::min(bins - 1, static_cast<int>((v - lo) / w))];
  return h;
}

inline void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    out << num(h.edges[i]) << ',' << num(h.edges[i + 1]) << ',' << h.counts[i] << '\n';
}

inline void write_histogram_svg(std::ostream& out, const Histogram& h, const std::string& title,
                                const std::string& x_label) {
  const int W = 640, H = 400, ml = 56, mr = 16, mt = 36, mb = 48;
  const int pw = W - ml - mr, ph = H - mt - mb;
  std::size_t peak = 1;
  for (auto c : h.counts) peak = std::max(peak, c);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  const std::size_t n = h.counts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double bw = double(pw) / double(n);
    const double bh = double(ph) * double(h.counts[i]) / double(peak);
    out << "<rect x=\"" << num(ml + bw * i, 2) << "\" y=\"" << num(mt + ph - bh, 2) << "\" width=\"" << num(bw - 1, 2)
        << "\" height=\"" << num(bh, 2) << "\" fill=\"#4878a8\"/>\n";
  }
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  if (!h.edges.empty()) {
    out << "<text x=\"" << ml << "\" y=\"" << mt + ph + 16 << "\" text-anchor=\"middle\">" << num(h.edges.front(), 2) << "</text>\n";
    out << "<text x=\"" << ml + pw << "\" y=\"" << mt + ph + 16 << "\" text-anchor=\"middle\">" << num(h.edges.back(), 2) << "</text>\n";
  }
  out << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 4 << "\" text-anchor=\"end\">" << peak << "</text>\n";
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  out << "</svg>\n";
}

}  // namespace floorline::report
