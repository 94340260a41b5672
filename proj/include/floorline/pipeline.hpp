#pragma once

// One panorama, one house: localize, trace, estimate.

#include <optional>
#include <string>

#include "floorline/estimator.hpp"
#include "floorline/extraction.hpp"
#include "floorline/geo.hpp"
#include "floorline/label_mask.hpp"

namespace floorline {

struct PipelineOptions {
  EstimatorOptions estimator;
  VisibilityOptions visibility;
  RoadsideOptions roadside;
  double half_window_deg = 45.0;
  double window_shift_deg = 22.5;
  std::optional<double> fraction_override;  // per-house visibility override
};

struct PanoramaEstimate {
  LocalizationResult localization;
  AzimuthWindow door_window;  // window in which the door was found
  DoorBottomTrace door;
  ElevationEstimate lfe;
  std::optional<RoadsideTrace> road;
  std::optional<ElevationEstimate> re;
  std::optional<double> hdsl;
  std::optional<ErrorCode> re_error;
};

/// First search window holding a door instance, with that instance.
struct DoorLocation {
  AzimuthWindow window;
  ColumnSpan span;
  DoorInstance door;
};

inline std::optional<DoorLocation> locate_door(const LabelMask& mask, double house_bearing_deg, double yaw_deg,
                                               const PipelineOptions& opt = {}) {
  const PanoramaGeometry geom{mask.width, mask.height};
  const auto loc = azimuth_to_column(house_bearing_deg, yaw_deg, geom, opt.half_window_deg);
  for (const auto& w : search_windows(house_bearing_deg, opt.half_window_deg, opt.window_shift_deg)) {
    const auto span = window_columns(w, yaw_deg, geom);
    if (auto door = door_in_span(mask, span, loc.column)) return DoorLocation{w, span, *door};
  }
  return std::nullopt;
}

inline PanoramaEstimate estimate_panorama(const LabelMask& mask, const DepthPlaneMap& depth, const CameraPose& pose,
                                          const GeoPoint& house, const PipelineOptions& opt = {}) {
  const PanoramaGeometry geom{mask.width, mask.height};
  PanoramaEstimate out;
  const double bearing = bearing_to(pose.location, house);
  out.localization = azimuth_to_column(bearing, pose.yaw_deg, geom, opt.half_window_deg);
  const auto found = locate_door(mask, bearing, pose.yaw_deg, opt);
  if (!found) throw Error(ErrorCode::NoVisibleDoor, "no door instance in any search window");
  out.door_window = found->window;
  out.door = door_bottom(mask, found->door, found->span, opt.visibility);
  out.lfe = estimate_lfe(out.door, pose, depth, geom, opt.estimator, opt.fraction_override);

  try {
    const auto span = window_columns(out.localization.window, pose.yaw_deg, geom);
    out.road = roadside(mask, span, opt.roadside);
    out.re = estimate_re(*out.road, pose, depth, geom, opt.estimator);
    out.hdsl = estimate_hdsl(out.lfe, *out.re);
  } catch (const Error& e) {
    out.re_error = e.code();
  }
  return out;
}

}  // namespace floorline
