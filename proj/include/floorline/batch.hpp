#pragma once

// Many houses against a bundle directory: per-house estimate rows, the
// filter funnel, and the evaluation report built from those rows.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "floorline/config.hpp"
#include "floorline/ingestion.hpp"
#include "floorline/pipeline.hpp"
#include "floorline/report.hpp"
#include "json.hpp"

namespace floorline {

struct EstimateRow {
  std::string house_id;
  std::string pano_id;
  std::string captured;
  std::optional<double> lfe, re, hdsl;
  std::string visibility;
  double visible_fraction = 0.0;
  std::size_t samples = 0, fenced = 0, visible = 0, below_median = 0;
  std::string roadside_feature;
  std::string error;  // error code name, empty on full success

  bool operator==(const EstimateRow&) const = default;
};

struct BatchResult {
  std::vector<EstimateRow> rows;  // ordered by house id
  std::vector<report::FunnelFlags> funnel;  // same order
};

/// Loads each bundle's mask and depthmap at most once, from any thread.
class AssetCache {
 public:
  explicit AssetCache(const std::vector<PanoramaBundle>& bundles) : bundles_(bundles), slots_(bundles.size()) {
    for (std::size_t i = 0; i < bundles.size(); ++i) index_[&bundles[i]] = i;
  }

  std::shared_ptr<const LabelMask> mask(const PanoramaBundle& b) {
    if (!b.has_mask()) return nullptr;
    auto& s = slot(b);
    std::lock_guard lock(s.m);
    if (!s.mask) s.mask = std::make_shared<const LabelMask>(load_bundle_mask(b));
    return s.mask;
  }

  std::shared_ptr<const DepthPlaneMap> depth(const PanoramaBundle& b) {
    auto& s = slot(b);
    std::lock_guard lock(s.m);
    if (!s.depth) s.depth = std::make_shared<const DepthPlaneMap>(decode_depthmap(b.depthmap));
    return s.depth;
  }

 private:
  struct Slot {
    std::mutex m;
    std::shared_ptr<const LabelMask> mask;
    std::shared_ptr<const DepthPlaneMap> depth;
  };
  Slot& slot(const PanoramaBundle& b) { return slots_[index_.at(&b)]; }

  const std::vector<PanoramaBundle>& bundles_;
  std::vector<Slot> slots_;
  std::map<const PanoramaBundle*, std::size_t> index_;
};

inline bool door_visible_in(const PanoramaBundle& b, AssetCache& cache, const HouseRecord& h,
                            const PipelineOptions& opt) {
  try {
    const auto m = cache.mask(b);
    return m && visible_door_columns(b, *m, h, opt) > 0;
  } catch (const Error&) {
    return false;
  }
}

inline std::pair<EstimateRow, report::FunnelFlags> estimate_house(const HouseRecord& h,
                                                                 const std::vector<PanoramaBundle>& bundles,
                                                                 AssetCache& cache, const RunConfig& cfg) {
  EstimateRow row;
  row.house_id = h.id;
  report::FunnelFlags flags;
  flags.has_truth = h.lfe_truth_m.has_value();

  MatchOptions any_date = cfg.match;
  any_date.captured_on_or_after.reset();
  HouseRecord undated = h;
  undated.reconstruction_date.reset();
  const auto nearby = candidates(undated, bundles, any_date);
  flags.has_image = !nearby.empty();
  for (const auto* b : nearby)
    if ((flags.door_visible = door_visible_in(*b, cache, h, cfg.pipeline))) break;

  const auto cands = candidates(h, bundles, cfg.match);
  try {
    if (cands.empty()) throw Error(ErrorCode::NoMatchingImage, "no eligible panorama near house " + h.id);
    std::vector<std::shared_ptr<const LabelMask>> masks;
    std::vector<Candidate> list;
    for (const auto* b : cands) {
      masks.push_back(cache.mask(*b));
      list.push_back({b, masks.back().get()});
    }
    const auto sel = select_best_image(list, h, cfg.pipeline);
    flags.matched = true;
    const auto& b = *cands[sel.index];
    row.pano_id = b.pano_id;
    row.captured = b.pose.captured.str();

    PipelineOptions opt = cfg.pipeline;
    if (auto it = cfg.visibility_overrides.find(h.id); it != cfg.visibility_overrides.end())
      opt.fraction_override = it->second;
    const auto est = estimate_panorama(*masks[sel.index], *cache.depth(b), b.pose, h.location, opt);
    flags.bottom_detected = true;
    row.lfe = est.lfe.value;
    row.visibility = visibility_name(est.door.visibility);
    row.visible_fraction = opt.fraction_override.value_or(est.door.visible_fraction);
    row.samples = est.lfe.sample_count;
    row.fenced = est.lfe.fenced_count;
    row.visible = est.lfe.visible_count;
    row.below_median = est.lfe.below_median_count;
    if (est.road) row.roadside_feature = label_name(est.road->feature);
    if (est.re) {
      row.re = est.re->value;
      row.hdsl = est.hdsl;
    } else {
      row.error = std::string(to_string(*est.re_error));
    }
  } catch (const Error& e) {
    row.error = std::string(to_string(e.code()));
  }
  return {row, flags};
}

/// Per-house estimates using up to cfg.jobs threads. Output order is by
/// house id whatever the schedule.
inline BatchResult run_estimates(const std::vector<HouseRecord>& houses, const std::vector<PanoramaBundle>& bundles,
                                 const RunConfig& cfg) {
  std::vector<std::size_t> order(houses.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return houses[a].id < houses[b].id; });

  BatchResult out;
  out.rows.resize(houses.size());
  out.funnel.resize(houses.size());
  AssetCache cache(bundles);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < order.size();) {
      auto [row, flags] = estimate_house(houses[order[i]], bundles, cache, cfg);
      out.rows[i] = std::move(row);
      out.funnel[i] = flags;
    }
  };
  const int n = std::clamp<int>(cfg.jobs, 1, std::max<int>(1, int(houses.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Estimate files

inline constexpr const char* kEstimateHeader =
    "house_id,pano_id,captured,lfe_m,re_m,hdsl_m,visibility,visible_fraction,samples,fenced,visible,below_median,"
    "roadside_feature,error";

inline void write_estimates(std::ostream& out, const std::vector<EstimateRow>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? report::num(*v) : std::string(); };
  out << kEstimateHeader << '\n';
  for (const auto& r : rows)
    out << csv::quote(r.house_id) << ',' << csv::quote(r.pano_id) << ',' << r.captured << ',' << opt(r.lfe) << ','
        << opt(r.re) << ',' << opt(r.hdsl) << ',' << r.visibility << ',' << report::num(r.visible_fraction, 2) << ','
        << r.samples << ',' << r.fenced << ',' << r.visible << ',' << r.below_median << ',' << r.roadside_feature
        << ',' << r.error << '\n';
}

inline std::vector<EstimateRow> read_estimates(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kEstimateHeader) throw ParseError(0, "not an estimates file");
  std::vector<EstimateRow> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = csv::split(line, row);
    if (f.size() != 14) throw ParseError(row, "expected 14 fields");
    auto opt = [&](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      try { return std::stod(s); } catch (const std::exception&) { throw ParseError(row, "bad number '" + s + "'"); }
    };
    auto count = [&](const std::string& s) -> std::size_t {
      try { return std::stoul(s); } catch (const std::exception&) { throw ParseError(row, "bad count '" + s + "'"); }
    };
    EstimateRow r;
    r.house_id = f[0];
    r.pano_id = f[1];
    r.captured = f[2];
    r.lfe = opt(f[3]);
    r.re = opt(f[4]);
    r.hdsl = opt(f[5]);
    r.visibility = f[6];
    r.visible_fraction = opt(f[7]).value_or(0.0);
    r.samples = count(f[8]);
    r.fenced = count(f[9]);
    r.visible = count(f[10]);
    r.below_median = count(f[11]);
    r.roadside_feature = f[12];
    r.error = f[13];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<EstimateRow> load_estimates(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return read_estimates(in);
}

inline void write_funnel(std::ostream& out, const std::array<std::size_t, 5>& counts) {
  out << "step,description,houses\n";
  for (int i = 0; i < 5; ++i) out << i + 1 << ',' << report::kFunnelSteps[i] << ',' << counts[i] << '\n';
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvaluateOptions {
  /// house id -> group name; "visibility" groups by the estimate's label.
  std::optional<std::map<std::string, std::string>> groups;
  bool group_by_visibility = false;
  std::optional<std::vector<EstimateRow>> compare;  // second run, paired on house id
  std::vector<double> hdsl_thresholds{0.305, 0.536};
  int histogram_bins = 20;
};

struct Evaluation {
  std::vector<report::EvaluationRow> rows;
  report::MaeResult mae;
  std::optional<double> outlier_threshold;
  std::optional<report::Distribution> hdsl;
  std::map<std::string, std::vector<double>> groups;  // abs errors
  std::optional<report::KruskalWallis> kruskal;
  std::string kruskal_error;
  std::optional<report::PairedT> paired;
  std::size_t paired_n = 0;
  std::string paired_error;
};

inline Evaluation evaluate(const std::vector<EstimateRow>& estimates, const std::vector<HouseRecord>& houses,
                           const EvaluateOptions& opt = {}) {
  std::map<std::string, double> truth;
  for (const auto& h : houses)
    if (h.lfe_truth_m) truth[h.id] = *h.lfe_truth_m;

  Evaluation ev;
  std::vector<double> hdsl;
  for (const auto& e : estimates) {
    if (e.hdsl) hdsl.push_back(*e.hdsl);
    auto t = truth.find(e.house_id);
    if (!e.lfe || t == truth.end()) continue;
    ev.rows.push_back(report::make_row(e.house_id, *e.lfe, t->second, e.visibility));
  }
  ev.mae = report::mae(ev.rows);
  if (ev.rows.size() >= 4) {
    ev.outlier_threshold = report::outlier_threshold(ev.rows);
    ev.rows = report::flag_outliers(std::move(ev.rows));
  }
  if (!hdsl.empty()) ev.hdsl = report::hdsl_distribution(hdsl);

  if (opt.group_by_visibility || opt.groups) {
    for (const auto& r : ev.rows) {
      std::string g;
      if (opt.group_by_visibility) {
        g = r.visibility;
      } else if (auto it = opt.groups->find(r.house_id); it != opt.groups->end()) {
        g = it->second;
      }
      if (!g.empty()) ev.groups[g].push_back(r.abs_error);
    }
    std::vector<std::vector<double>> gs;
    for (const auto& [_, v] : ev.groups) gs.push_back(v);
    try {
      ev.kruskal = report::kruskal_wallis(gs);
    } catch (const Error& e) {
      ev.kruskal_error = std::string(to_string(e.code()));
    }
  }

  if (opt.compare) {
    std::map<std::string, double> other;
    for (const auto& e : *opt.compare)
      if (e.lfe && truth.count(e.house_id)) other[e.house_id] = std::abs(*e.lfe - truth[e.house_id]);
    std::vector<double> a, b;
    for (const auto& r : ev.rows)
      if (auto it = other.find(r.house_id); it != other.end()) {
        a.push_back(r.abs_error);
        b.push_back(it->second);
      }
    ev.paired_n = a.size();
    try {
      ev.paired = report::paired_t_test(a, b);
    } catch (const Error& e) {
      ev.paired_error = std::string(to_string(e.code()));
    }
  }
  return ev;
}

inline nlohmann::json evaluation_summary(const Evaluation& ev, const EvaluateOptions& opt = {}) {
  nlohmann::json j;
  j["n"] = ev.mae.n;
  j["mae_m"] = ev.mae.meters;
  j["mae_percent_per_house"] = ev.mae.percent_per_house;
  j["mae_percent_of_mean_truth"] = ev.mae.percent_of_mean_truth;
  if (ev.outlier_threshold) {
    j["outlier_threshold_m"] = *ev.outlier_threshold;
    j["outliers"] = std::count_if(ev.rows.begin(), ev.rows.end(), [](const auto& r) { return r.outlier; });
  }
  if (ev.hdsl) {
    nlohmann::json below = nlohmann::json::object();
    for (double t : opt.hdsl_thresholds) below[report::num(t, 3)] = ev.hdsl->fraction_below(t);
    j["hdsl"] = {{"n", ev.hdsl->sorted.size()},
                 {"mean_m", ev.hdsl->mean},
                 {"median_m", ev.hdsl->median},
                 {"min_m", ev.hdsl->min},
                 {"max_m", ev.hdsl->max},
                 {"p10_m", ev.hdsl->percentile(10)},
                 {"p30_m", ev.hdsl->percentile(30)},
                 {"p90_m", ev.hdsl->percentile(90)},
                 {"fraction_below", below}};
  }
  if (!ev.groups.empty() || !ev.kruskal_error.empty()) {
    nlohmann::json kw;
    nlohmann::json sizes = nlohmann::json::object();
    for (const auto& [g, v] : ev.groups) sizes[g] = v.size();
    kw["groups"] = sizes;
    if (ev.kruskal) {
      kw["h"] = ev.kruskal->h;
      kw["df"] = ev.kruskal->df;
      kw["p"] = ev.kruskal->p;
      if (ev.kruskal->p_exact) kw["p_exact"] = *ev.kruskal->p_exact;
    } else {
      kw["error"] = ev.kruskal_error;
    }
    j["kruskal_wallis"] = kw;
  }
  if (ev.paired || !ev.paired_error.empty()) {
    nlohmann::json pt = {{"pairs", ev.paired_n}};
    if (ev.paired) {
      pt["t"] = ev.paired->t;
      pt["df"] = ev.paired->df;
      pt["p"] = ev.paired->p;
      pt["mean_difference_m"] = ev.paired->mean_difference;
    } else {
      pt["error"] = ev.paired_error;
    }
    j["paired_t"] = pt;
  }
  return j;
}

/// evaluation.csv, summary.json and histogram CSV / SVG files.
inline void write_evaluation(const fs::path& dir, const Evaluation& ev, const EvaluateOptions& opt = {}) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "evaluation.csv");
    report::write_rows_csv(out, ev.rows);
  }
  write_text(dir / "summary.json", evaluation_summary(ev, opt).dump(2) + "\n");
  std::vector<double> errors;
  for (const auto& r : ev.rows) errors.push_back(r.error);
  const auto eh = report::histogram(errors, opt.histogram_bins);
  {
    std::ofstream out(dir / "error_histogram.csv");
    report::write_histogram_csv(out, eh);
  }
  {
    std::ofstream out(dir / "error_histogram.svg");
    report::write_histogram_svg(out, eh, "LFE error", "estimate - truth (m)");
  }
  if (ev.hdsl) {
    const auto hh = report::histogram(ev.hdsl->sorted, opt.histogram_bins);
    std::ofstream csv_out(dir / "hdsl_histogram.csv");
    report::write_histogram_csv(csv_out, hh);
    std::ofstream svg_out(dir / "hdsl_histogram.svg");
    report::write_histogram_svg(svg_out, hh, "HDSL", "HDSL (m)");
  }
}

}  // namespace floorline
