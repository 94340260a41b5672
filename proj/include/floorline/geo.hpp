#pragma once

// Spherical and equirectangular geometry.
//
// Panorama convention: column W/2 faces the camera yaw, columns grow
// clockwise, row 0 looks straight up. A pixel (p_x, p_y) is sampled at its
// integer coordinate, so row_to_pitch(H/2) is the horizon.

#include <cmath>
#include <numbers>
#include <vector>

#include "floorline/depth_codec.hpp"
#include "floorline/error.hpp"

namespace floorline {

inline constexpr double kDegToRad = std::numbers::pi / 180.0;
inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;
inline constexpr double kEarthRadiusM = 6371008.8;

/// Wraps into [0, 360).
inline double normalize_deg(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0) r += 360.0;
  if (r >= 360.0) r -= 360.0;
  return r;
}

/// Wraps into (-180, 180].
inline double signed_deg(double deg) {
  double r = normalize_deg(deg);
  if (r > 180.0) r -= 360.0;
  return r;
}

struct GeoPoint {
  double lat = 0.0;  // degrees [-90, 90]
  double lon = 0.0;  // degrees (-180, 180]

  bool valid() const {
    return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 && lon > -180.0 &&
           lon <= 180.0;
  }
};

struct PanoramaGeometry {
  int width = 0;
  int height = 0;

  static PanoramaGeometry from_height(int height) { return {2 * height, height}; }

  bool valid() const { return height > 0 && width == 2 * height; }
};

/// Closed azimuth interval [start, start + width] taken modulo 360.
struct AzimuthWindow {
  double start_deg = 0.0;
  double width_deg = 90.0;

  double end_deg() const { return normalize_deg(start_deg + width_deg); }
  double center_deg() const { return normalize_deg(start_deg + width_deg / 2.0); }
  bool contains(double azimuth_deg) const { return normalize_deg(azimuth_deg - start_deg) <= width_deg; }
};

struct LocalizationResult {
  double house_bearing_deg = 0.0;  // [0, 360)
  double delta_deg = 0.0;          // (-180, 180], from yaw to house
  double column = 0.0;             // [0, W)
  AzimuthWindow window;
};

/// Great-circle central angle (haversine form), radians.
inline double central_angle(const GeoPoint& a, const GeoPoint& b) {
  const double dlat = (b.lat - a.lat) * kDegToRad;
  const double dlon = (b.lon - a.lon) * kDegToRad;
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * kDegToRad) * std::cos(b.lat * kDegToRad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * std::atan2(std::sqrt(s), std::sqrt(std::max(0.0, 1.0 - s)));
}

inline double distance_m(const GeoPoint& a, const GeoPoint& b) { return kEarthRadiusM * central_angle(a, b); }

/// Initial great-circle bearing from camera to house, degrees [0, 360).
inline double bearing_to(const GeoPoint& camera, const GeoPoint& house) {
  if (central_angle(camera, house) < 1e-9)
    throw Error(ErrorCode::CoincidentPoints, "camera and house locations coincide");
  const double lat_c = camera.lat * kDegToRad;
  const double lat_h = house.lat * kDegToRad;
  const double dlon = (house.lon - camera.lon) * kDegToRad;
  const double x = std::sin(dlon) * std::cos(lat_h);
  const double y = std::cos(lat_c) * std::sin(lat_h) - std::sin(lat_c) * std::cos(lat_h) * std::cos(dlon);
  return normalize_deg(std::atan2(x, y) * kRadToDeg);
}

/// Point reached by travelling `meters` along `bearing_deg` on the sphere.
inline GeoPoint destination(const GeoPoint& from, double bearing_deg, double meters) {
  const double delta = meters / kEarthRadiusM;
  const double theta = bearing_deg * kDegToRad;
  const double lat1 = from.lat * kDegToRad, lon1 = from.lon * kDegToRad;
  const double lat2 = std::asin(std::sin(lat1) * std::cos(delta) + std::cos(lat1) * std::sin(delta) * std::cos(theta));
  const double lon2 = lon1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(lat1),
                                        std::cos(delta) - std::sin(lat1) * std::sin(lat2));
  double lon = lon2 * kRadToDeg;
  lon = std::fmod(lon + 540.0, 360.0) - 180.0;
  if (lon == -180.0) lon = 180.0;
  return {lat2 * kRadToDeg, lon};
}

/// Column of the house in the panorama. The signed form reproduces both
/// branches of the piecewise definition and stays total across the 0/360
/// seam.
inline LocalizationResult azimuth_to_column(double house_bearing_deg, double yaw_deg, const PanoramaGeometry& geom,
                                            double half_window_deg = 45.0) {
  LocalizationResult r;
  r.house_bearing_deg = normalize_deg(house_bearing_deg);
  r.delta_deg = signed_deg(house_bearing_deg - yaw_deg);
  const double w = geom.width;
  double col = std::fmod(w / 2.0 + r.delta_deg * w / 360.0, w);
  if (col < 0) col += w;
  r.column = col;
  r.window = {normalize_deg(r.house_bearing_deg - half_window_deg), 2.0 * half_window_deg};
  return r;
}

/// Azimuth of a column relative to the heading, [0, 360).
inline double column_to_azimuth(double col, const PanoramaGeometry& geom) {
  return normalize_deg((col - geom.width / 2.0) * 360.0 / geom.width);
}

/// Column (possibly fractional) for an azimuth relative to the heading.
inline double azimuth_to_column_rel(double rel_azimuth_deg, const PanoramaGeometry& geom) {
  const double w = geom.width;
  double col = std::fmod(w / 2.0 + normalize_deg(rel_azimuth_deg) * w / 360.0, w);
  if (col < 0) col += w;
  return col;
}

inline double row_to_pitch(double row, const PanoramaGeometry& geom) {
  if (!(row >= 0.0 && row < geom.height))
    throw Error(ErrorCode::RowOutOfRange, "row " + std::to_string(row) + " outside [0, H)");
  return (geom.height / 2.0 - row) * 180.0 / geom.height;
}

/// Nearest row for a pitch in (-90, 90]; rows below the last one clamp.
inline int pitch_to_row(double pitch_deg, const PanoramaGeometry& geom) {
  if (!(pitch_deg > -90.0 && pitch_deg <= 90.0))
    throw Error(ErrorCode::PitchOutOfRange, "pitch " + std::to_string(pitch_deg) + " outside (-90, 90]");
  const double row = geom.height / 2.0 - pitch_deg * geom.height / 180.0;
  const long r = static_cast<long>(std::floor(row + 0.5));
  return static_cast<int>(std::min<long>(r, geom.height - 1));
}

inline double height_offset(double depth_m, double pitch_deg) { return depth_m * std::sin(pitch_deg * kDegToRad); }

/// Camera-frame ray through a panorama pixel.
inline RayDirection pixel_ray(int col, int row, const PanoramaGeometry& geom) {
  return {column_to_azimuth(col, geom), row_to_pitch(row, geom)};
}

/// The primary window around the house bearing, then the window shifted
/// by -shift and by +shift.
inline std::vector<AzimuthWindow> search_windows(double house_bearing_deg, double half_width_deg = 45.0,
                                                 double shift_deg = 22.5) {
  const double b = normalize_deg(house_bearing_deg);
  const double w = 2.0 * half_width_deg;
  return {{normalize_deg(b - half_width_deg), w},
          {normalize_deg(b - half_width_deg - shift_deg), w},
          {normalize_deg(b - half_width_deg + shift_deg), w}};
}

/// Contiguous (wrapping) run of panorama columns.
struct ColumnSpan {
  int start = 0;
  int count = 0;
  int width = 0;

  bool contains(int col) const {
    int off = (col - start) % width;
    if (off < 0) off += width;
    return off < count;
  }
  int at(int i) const { return (start + i) % width; }
};

/// Columns whose sampled azimuth falls inside an absolute azimuth window.
inline ColumnSpan window_columns(const AzimuthWindow& window, double yaw_deg, const PanoramaGeometry& geom) {
  const double first = azimuth_to_column_rel(window.start_deg - yaw_deg, geom);
  const double last = first + window.width_deg * geom.width / 360.0;
  const int lo = static_cast<int>(std::ceil(first - 1e-9));
  const int count = std::min(static_cast<int>(std::floor(last + 1e-9)) - lo + 1, geom.width);
  return {lo % geom.width, count, geom.width};
}

}  // namespace floorline
