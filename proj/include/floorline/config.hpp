#pragma once

// Run configuration and its JSON file form.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include "floorline/date.hpp"
#include "floorline/error.hpp"
#include "floorline/ingestion.hpp"
#include "floorline/pipeline.hpp"
#include "json.hpp"

namespace floorline {

struct RunConfig {
  std::string houses_path;
  std::string bundles_path;
  std::string output_path;
  PipelineOptions pipeline;
  MatchOptions match;
  std::map<std::string, double> visibility_overrides;  // house id -> fraction
  int jobs = 1;

  bool operator==(const RunConfig& o) const { return to_json() == o.to_json(); }

  nlohmann::json to_json() const {
    nlohmann::json overrides = nlohmann::json::object();
    for (const auto& [k, v] : visibility_overrides) overrides[k] = v;
    const auto& p = pipeline;
    return {
        {"houses", houses_path},
        {"bundles", bundles_path},
        {"output", output_path},
        {"sampling", p.estimator.sampling == SamplingMode::PlaneExact ? "plane_exact" : "nearest_pixel"},
        {"final_subset", p.estimator.final_subset == FinalSubset::BelowMedian ? "below_median" : "visibility_subset"},
        {"fence_k", p.estimator.fence_k},
        {"half_window_deg", p.half_window_deg},
        {"window_shift_deg", p.window_shift_deg},
        {"roadside_offset_px", p.roadside.offset_px},
        {"roadside_min_coverage", p.roadside.min_coverage},
        {"door_aspect", p.visibility.door_aspect},
        {"complete_ratio", p.visibility.complete_ratio},
        {"captured_on_or_after", match.captured_on_or_after ? nlohmann::json(match.captured_on_or_after->str()) : nlohmann::json()},
        {"max_distance_m", match.max_distance_m},
        {"visibility_overrides", overrides},
        {"jobs", jobs},
    };
  }

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
      c.houses_path = j.value("houses", "");
      c.bundles_path = j.value("bundles", "");
      c.output_path = j.value("output", "");
      auto& p = c.pipeline;
      const auto sampling = j.value("sampling", "plane_exact");
      if (sampling == "plane_exact") p.estimator.sampling = SamplingMode::PlaneExact;
      else if (sampling == "nearest_pixel") p.estimator.sampling = SamplingMode::NearestPixel;
      else throw Error(ErrorCode::SchemaError, "sampling must be plane_exact or nearest_pixel");
      const auto subset = j.value("final_subset", "below_median");
      if (subset == "below_median") p.estimator.final_subset = FinalSubset::BelowMedian;
      else if (subset == "visibility_subset") p.estimator.final_subset = FinalSubset::VisibilitySubset;
      else throw Error(ErrorCode::SchemaError, "final_subset must be below_median or visibility_subset");
      p.estimator.fence_k = j.value("fence_k", p.estimator.fence_k);
      p.half_window_deg = j.value("half_window_deg", p.half_window_deg);
      p.window_shift_deg = j.value("window_shift_deg", p.window_shift_deg);
      p.roadside.offset_px = j.value("roadside_offset_px", p.roadside.offset_px);
      p.roadside.min_coverage = j.value("roadside_min_coverage", p.roadside.min_coverage);
      p.visibility.door_aspect = j.value("door_aspect", p.visibility.door_aspect);
      p.visibility.complete_ratio = j.value("complete_ratio", p.visibility.complete_ratio);
      if (j.contains("captured_on_or_after")) {
        const auto& d = j.at("captured_on_or_after");
        c.match.captured_on_or_after = d.is_null() ? std::nullopt : std::optional<Date>(Date::parse(d.get<std::string>()));
      }
      c.match.max_distance_m = j.value("max_distance_m", c.match.max_distance_m);
      if (j.contains("visibility_overrides"))
        for (const auto& [k, v] : j.at("visibility_overrides").items()) c.visibility_overrides[k] = v.get<double>();
      c.jobs = j.value("jobs", c.jobs);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaError, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
  }

  void validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorCode::SchemaError, "config: " + what); };
    const auto& p = pipeline;
    if (!(p.half_window_deg > 0 && p.half_window_deg <= 180)) bad("half_window_deg must be in (0, 180]");
    if (!(p.window_shift_deg >= 0 && p.window_shift_deg <= 180)) bad("window_shift_deg must be in [0, 180]");
    if (p.roadside.offset_px < 0) bad("roadside_offset_px must be >= 0");
    if (!(p.roadside.min_coverage >= 0 && p.roadside.min_coverage <= 1)) bad("roadside_min_coverage must be in [0, 1]");
    if (!(p.estimator.fence_k > 0)) bad("fence_k must be > 0");
    if (!(p.visibility.door_aspect > 0)) bad("door_aspect must be > 0");
    if (!(p.visibility.complete_ratio > 0 && p.visibility.complete_ratio <= 1)) bad("complete_ratio must be in (0, 1]");
    if (!(match.max_distance_m > 0)) bad("max_distance_m must be > 0");
    for (const auto& [k, v] : visibility_overrides)
      if (v != 0.25 && v != 0.5 && v != 0.75 && v != 1.0) bad("visibility override for " + k + " must be 0.25, 0.5, 0.75 or 1");
    if (jobs < 1) bad("jobs must be >= 1");
  }
};

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return RunConfig::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

inline void save_config(const std::filesystem::path& path, const RunConfig& c) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << c.to_json().dump(2) << '\n';
}

}  // namespace floorline
