#pragma once

// Pixel traces to elevations, and the robust LFE / RE / HDSL procedure.
//
// Door bottom:  samples -> Tukey fence -> lowest `fraction` of the survivors
//               -> values not above that subset's median -> median.
// Roadside:     samples -> Tukey fence -> median.

#include <algorithm>
#include <optional>
#include <vector>

#include "floorline/date.hpp"
#include "floorline/depth_codec.hpp"
#include "floorline/error.hpp"
#include "floorline/extraction.hpp"
#include "floorline/geo.hpp"
#include "floorline/robust.hpp"

namespace floorline {

struct CameraPose {
  GeoPoint location;
  double elevation_m = 0.0;  // camera elevation above MSL
  double yaw_deg = 0.0;      // [0, 360)
  Date captured;
};

struct ElevationSample {
  Pixel pixel;
  double pitch_deg = 0.0;
  double depth_m = 0.0;
  double height_offset_m = 0.0;
  double elevation_m = 0.0;
};

enum class EstimateKind { LFE, RE };

/// Which subset the final median is taken over. BelowMedian uses the
/// values not above the visibility subset's median; VisibilitySubset takes
/// the median of the visibility subset itself.
enum class FinalSubset { BelowMedian, VisibilitySubset };

struct EstimatorOptions {
  SamplingMode sampling = SamplingMode::PlaneExact;
  double fence_k = 1.5;
  FinalSubset final_subset = FinalSubset::BelowMedian;
};

struct ElevationEstimate {
  double value = 0.0;
  EstimateKind kind = EstimateKind::LFE;
  std::size_t sample_count = 0;       // pixels with a surface
  std::size_t fenced_count = 0;       // |{E}| after outlier removal
  std::size_t visible_count = 0;      // |{E'}|
  std::size_t below_median_count = 0; // |{E''}|
  Visibility visibility = Visibility::Complete;
  double visible_fraction = 1.0;
  double survivor_min = 0.0;
  double survivor_max = 0.0;
};

inline std::optional<ElevationSample> sample_elevation(const Pixel& px, const CameraPose& pose,
                                                       const DepthPlaneMap& map, const PanoramaGeometry& geom,
                                                       SamplingMode mode = SamplingMode::PlaneExact) {
  if (px.x < 0 || px.x >= geom.width || px.y < 0 || px.y >= geom.height)
    throw Error(ErrorCode::RowOutOfRange, "pixel outside the panorama");
  const auto ray = pixel_ray(px.x, px.y, geom);
  const auto depth = depth_at(map, ray, mode);
  if (!depth) return std::nullopt;
  ElevationSample s;
  s.pixel = px;
  s.pitch_deg = ray.pitch_deg;
  s.depth_m = *depth;
  s.height_offset_m = height_offset(s.depth_m, s.pitch_deg);
  s.elevation_m = pose.elevation_m + s.height_offset_m;
  return s;
}

inline std::vector<ElevationSample> sample_pixels(const std::vector<Pixel>& pixels, const CameraPose& pose,
                                                  const DepthPlaneMap& map, const PanoramaGeometry& geom,
                                                  SamplingMode mode) {
  std::vector<ElevationSample> out;
  out.reserve(pixels.size());
  for (const auto& p : pixels)
    if (auto s = sample_elevation(p, pose, map, geom, mode)) out.push_back(*s);
  return out;
}

/// Door-bottom (LFE) procedure over raw elevations.
inline ElevationEstimate estimate_door_elevation(const std::vector<double>& elevations, double visible_fraction,
                                                 const EstimatorOptions& opt = {}) {
  if (elevations.empty()) throw Error(ErrorCode::EstimationFailed, "no door-bottom pixel has a surface");
  ElevationEstimate e;
  e.kind = EstimateKind::LFE;
  e.sample_count = elevations.size();
  e.visible_fraction = visible_fraction;
  e.visibility = visible_fraction >= 1.0 ? Visibility::Complete : Visibility::Partial;
  const auto fenced = robust::remove_outliers(elevations, opt.fence_k);
  const auto visible = robust::visibility_subset(fenced, visible_fraction);
  const auto lower = robust::below_median_subset(visible);
  e.fenced_count = fenced.size();
  e.visible_count = visible.size();
  e.below_median_count = lower.size();
  const auto& final_set = opt.final_subset == FinalSubset::BelowMedian ? lower : visible;
  e.value = robust::median(final_set);
  e.survivor_min = final_set.front();
  e.survivor_max = final_set.back();
  return e;
}

/// Roadside (RE) procedure over raw elevations.
inline ElevationEstimate estimate_road_elevation(const std::vector<double>& elevations,
                                                 const EstimatorOptions& opt = {}) {
  if (elevations.empty()) throw Error(ErrorCode::EstimationFailed, "no roadside pixel has a surface");
  ElevationEstimate e;
  e.kind = EstimateKind::RE;
  e.sample_count = elevations.size();
  auto fenced = robust::remove_outliers(elevations, opt.fence_k);
  std::sort(fenced.begin(), fenced.end());
  e.fenced_count = e.visible_count = e.below_median_count = fenced.size();
  e.value = robust::median(fenced);
  e.survivor_min = fenced.front();
  e.survivor_max = fenced.back();
  return e;
}

inline std::vector<double> elevations_of(const std::vector<ElevationSample>& samples) {
  std::vector<double> v;
  v.reserve(samples.size());
  for (const auto& s : samples) v.push_back(s.elevation_m);
  return v;
}

/// `fraction_override` replaces the trace's own visibility label.
inline ElevationEstimate estimate_lfe(const DoorBottomTrace& trace, const CameraPose& pose, const DepthPlaneMap& map,
                                      const PanoramaGeometry& geom, const EstimatorOptions& opt = {},
                                      std::optional<double> fraction_override = std::nullopt) {
  if (trace.pixels.empty()) throw Error(ErrorCode::EmptyInstance, "empty door-bottom trace");
  const auto samples = sample_pixels(trace.pixels, pose, map, geom, opt.sampling);
  return estimate_door_elevation(elevations_of(samples), fraction_override.value_or(trace.visible_fraction), opt);
}

inline ElevationEstimate estimate_re(const RoadsideTrace& trace, const CameraPose& pose, const DepthPlaneMap& map,
                                     const PanoramaGeometry& geom, const EstimatorOptions& opt = {}) {
  if (trace.pixels.empty()) throw Error(ErrorCode::NoRoadsideFeature, "empty roadside trace");
  const auto samples = sample_pixels(trace.pixels, pose, map, geom, opt.sampling);
  return estimate_road_elevation(elevations_of(samples), opt);
}

inline double estimate_hdsl(const ElevationEstimate& lfe, const ElevationEstimate& re) {
  if (lfe.kind != EstimateKind::LFE || re.kind != EstimateKind::RE)
    throw Error(ErrorCode::KindMismatch, "HDSL needs an LFE and an RE estimate");
  return lfe.value - re.value;
}

}  // namespace floorline
