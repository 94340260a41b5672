#pragma once

// Parametric street scenes rendered to exact label masks and plane-encoded
// depthmaps.
//
// The street runs perpendicular to the facade normal. Along that normal
// (coordinate s, metres from the camera) the scene is:
//
//   dirt | grass | road [-near, far] | grass | dirt ... facade at s = D
//
// Road and ground are horizontal planes (joined by vertical curb faces when
// their elevations differ). The facade is a vertical rectangle rising from
// the ground; the door is a rectangle on the facade plane. Neighbouring
// buildings are extra facade rectangles labelled "other".

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "floorline/date.hpp"
#include "floorline/depth_codec.hpp"
#include "floorline/error.hpp"
#include "floorline/estimator.hpp"
#include "floorline/geo.hpp"
#include "floorline/label_mask.hpp"
#include "floorline/pipeline.hpp"
#include "json.hpp"

namespace floorline::synth {

struct FacadeSpec {
  double distance_m = 12.0;
  double azimuth_deg = 90.0;  // compass direction of the facade normal from the camera
  double width_m = 12.0;
  double height_m = 6.0;
  double lateral_offset_m = 0.0;
};

struct DoorSpec {
  double bottom_elevation_m = 11.0;  // true LFE
  double width_m = 0.9;
  double height_m = 2.0;
  double lateral_offset_m = 0.0;     // along the facade, from the facade foot point
};

struct RoadSpec {
  double near_m = 4.0;  // extent away from the facade
  double far_m = 4.0;   // extent toward the facade
  double elevation_m = 10.0;
};

struct Scene {
  GeoPoint camera{29.68, -95.48};
  double camera_height_m = 2.5;  // above the road surface the camera stands on
  double yaw_deg = 0.0;
  double ground_elevation_m = 10.0;
  RoadSpec road;
  double grass_width_m = 3.0;
  FacadeSpec facade;
  DoorSpec door;
  std::vector<FacadeSpec> neighbors;
  Date captured{2019, 6, 1};
  std::string pano_id = "synthetic";
  std::string house_id = "house";
  std::string address = "1 Synthetic St";

  double camera_elevation() const { return road.elevation_m + camera_height_m; }
};

struct Truth {
  double lfe = 0.0;
  double re = 0.0;
  double hdsl = 0.0;
};

struct Rendered {
  LabelMask mask;
  DepthPlaneMap depth;
  CameraPose pose;
  PanoramaGeometry geom;
  GeoPoint house;
  Truth truth;
};

// ---------------------------------------------------------------------------
// Primitives in the camera frame (x right, y heading, z up, origin at the
// camera centre).

struct Primitive {
  std::array<double, 3> normal{};  // unit, pointing away from the camera
  double distance = 0.0;           // plane: normal . p = distance
  std::array<double, 3> u_axis{}, v_axis{};
  double u0 = -std::numeric_limits<double>::infinity(), u1 = std::numeric_limits<double>::infinity();
  double v0 = -std::numeric_limits<double>::infinity(), v1 = std::numeric_limits<double>::infinity();
  Label label = Label::Other;
  std::size_t plane = 0;  // index into the plane table
};

inline std::array<double, 3> horizontal(double rel_azimuth_deg) {
  return {std::sin(rel_azimuth_deg * kDegToRad), std::cos(rel_azimuth_deg * kDegToRad), 0.0};
}

inline void check_scene(const Scene& s) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::DegenerateScene, why); };
  if (!(s.camera_height_m > 0)) fail("camera must be above the road");
  if (!(s.camera_elevation() > s.ground_elevation_m)) fail("camera must be above the ground");
  if (!(s.road.near_m >= 0 && s.road.far_m > 0)) fail("camera must stand inside the road band");
  if (!(s.grass_width_m >= 0)) fail("negative grass width");
  if (!(s.facade.distance_m > s.road.far_m)) fail("facade must lie beyond the road");
  if (!(s.facade.width_m > 0 && s.facade.height_m > 0)) fail("empty facade");
  const auto& d = s.door;
  if (!(d.width_m > 0 && d.height_m > 0)) fail("empty door");
  if (d.bottom_elevation_m < s.ground_elevation_m - 1e-12 ||
      d.bottom_elevation_m + d.height_m > s.ground_elevation_m + s.facade.height_m + 1e-12)
    fail("door does not fit on the facade vertically");
  if (std::abs(d.lateral_offset_m - s.facade.lateral_offset_m) + d.width_m / 2 > s.facade.width_m / 2 + 1e-12)
    fail("door does not fit on the facade horizontally");
  for (const auto& n : s.neighbors)
    if (!(n.distance_m > 0 && n.width_m > 0 && n.height_m > 0)) fail("degenerate neighbour facade");
}

/// Scene surfaces plus the deduplicated plane table (slot 0 = no surface).
struct Assembly {
  std::vector<Primitive> prims;
  std::vector<Plane> planes;
  std::vector<std::array<double, 4>> exact_planes;  // double-precision copies
};

inline Assembly assemble(const Scene& s) {
  check_scene(s);
  Assembly a;
  a.planes.push_back(Plane{});
  a.exact_planes.push_back({0, 0, 1, 0});
  auto plane_index = [&](const std::array<double, 3>& n, double d) {
    for (std::size_t i = 1; i < a.exact_planes.size(); ++i) {
      const auto& p = a.exact_planes[i];
      if (std::abs(p[0] - n[0]) < 1e-12 && std::abs(p[1] - n[1]) < 1e-12 && std::abs(p[2] - n[2]) < 1e-12 &&
          std::abs(p[3] - d) < 1e-9)
        return i;
    }
    a.exact_planes.push_back({n[0], n[1], n[2], d});
    a.planes.push_back(Plane{{float(n[0]), float(n[1]), float(n[2])}, float(d)});
    return a.exact_planes.size() - 1;
  };

  const double ce = s.camera_elevation();
  const double rel_az = s.facade.azimuth_deg - s.yaw_deg;
  const auto f = horizontal(rel_az);        // toward the facade
  const auto t = horizontal(rel_az + 90.0); // along the street
  const std::array<double, 3> up{0, 0, 1};
  const std::array<double, 3> down{0, 0, -1};
  const double inf = std::numeric_limits<double>::infinity();

  auto add = [&](Primitive p) {
    p.plane = plane_index(p.normal, p.distance);
    a.prims.push_back(p);
  };

  // Facade-plane surfaces first: the door wins ties with its facade.
  {
    const auto& fc = s.facade;
    const auto& d = s.door;
    Primitive door;
    door.normal = f;
    door.distance = fc.distance_m;
    door.u_axis = t;
    door.u0 = d.lateral_offset_m - d.width_m / 2;
    door.u1 = d.lateral_offset_m + d.width_m / 2;
    door.v_axis = up;
    door.v0 = d.bottom_elevation_m - ce;
    door.v1 = d.bottom_elevation_m + d.height_m - ce;
    door.label = Label::Door;
    add(door);

    Primitive wall = door;
    wall.u0 = fc.lateral_offset_m - fc.width_m / 2;
    wall.u1 = fc.lateral_offset_m + fc.width_m / 2;
    wall.v0 = s.ground_elevation_m - ce;
    wall.v1 = s.ground_elevation_m + fc.height_m - ce;
    wall.label = Label::Other;
    add(wall);
  }
  for (const auto& n : s.neighbors) {
    Primitive p;
    p.normal = horizontal(n.azimuth_deg - s.yaw_deg);
    p.distance = n.distance_m;
    p.u_axis = horizontal(n.azimuth_deg - s.yaw_deg + 90.0);
    p.u0 = n.lateral_offset_m - n.width_m / 2;
    p.u1 = n.lateral_offset_m + n.width_m / 2;
    p.v_axis = up;
    p.v0 = s.ground_elevation_m - ce;
    p.v1 = s.ground_elevation_m + n.height_m - ce;
    p.label = Label::Other;
    add(p);
  }

  // Ground bands.
  const double near = s.road.near_m, far = s.road.far_m, grass = s.grass_width_m;
  auto band = [&](double elevation, double s0, double s1, Label label) {
    if (!(s1 > s0)) return;
    Primitive p;
    p.normal = down;
    p.distance = ce - elevation;
    p.u_axis = f;
    p.u0 = s0;
    p.u1 = s1;
    p.v_axis = t;
    p.label = label;
    add(p);
  };
  band(s.road.elevation_m, -near, far, Label::Road);
  band(s.ground_elevation_m, far, far + grass, Label::Grass);
  band(s.ground_elevation_m, far + grass, inf, Label::Dirt);
  band(s.ground_elevation_m, -near - grass, -near, Label::Grass);
  band(s.ground_elevation_m, -inf, -near - grass, Label::Dirt);

  // Curb faces between road and ground.
  if (std::abs(s.ground_elevation_m - s.road.elevation_m) > 1e-12) {
    const double lo = std::min(s.ground_elevation_m, s.road.elevation_m) - ce;
    const double hi = std::max(s.ground_elevation_m, s.road.elevation_m) - ce;
    Primitive c;
    c.normal = f;
    c.distance = far;
    c.u_axis = t;
    c.v_axis = up;
    c.v0 = lo;
    c.v1 = hi;
    c.label = Label::Other;
    add(c);
    if (near > 0) {
      c.normal = {-f[0], -f[1], 0.0};
      c.distance = near;
      add(c);
    }
  }
  return a;
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  const Primitive* prim = nullptr;
};

inline Hit cast(const Assembly& a, const std::array<double, 3>& dir) {
  Hit best;
  for (const auto& p : a.prims) {
    const double denom = p.normal[0] * dir[0] + p.normal[1] * dir[1] + p.normal[2] * dir[2];
    if (denom <= 1e-12) continue;
    const double t = p.distance / denom;
    if (!(t < best.t)) continue;
    const double u = t * (p.u_axis[0] * dir[0] + p.u_axis[1] * dir[1] + p.u_axis[2] * dir[2]);
    if (u < p.u0 || u > p.u1) continue;
    const double v = t * (p.v_axis[0] * dir[0] + p.v_axis[1] * dir[1] + p.v_axis[2] * dir[2]);
    if (v < p.v0 || v > p.v1) continue;
    best = {t, &p};
  }
  return best;
}

/// Exact distance from the camera to the first surface along `ray`.
inline std::optional<double> analytic_depth(const Scene& scene, const RayDirection& ray) {
  const auto a = assemble(scene);
  const auto h = cast(a, ray.unit_vector());
  if (!h.prim) return std::nullopt;
  return h.t;
}

/// Label mask of a full panorama. Ray directions and primitive projections
/// are factored per column and per row so each pixel costs a handful of
/// multiply-adds per primitive.
inline LabelMask render_mask(const Assembly& a, const PanoramaGeometry& geom) {
  LabelMask mask(geom.width, geom.height, Label::Other);
  const std::size_t np = a.prims.size();
  // Per column: horizontal part of (normal, u, v) . dir divided by cos(pitch).
  std::vector<double> col_n(np * geom.width), col_u(np * geom.width), col_v(np * geom.width);
  for (int c = 0; c < geom.width; ++c) {
    const double az = column_to_azimuth(c, geom) * kDegToRad;
    const double sa = std::sin(az), ca = std::cos(az);
    for (std::size_t k = 0; k < np; ++k) {
      const auto& p = a.prims[k];
      col_n[c * np + k] = p.normal[0] * sa + p.normal[1] * ca;
      col_u[c * np + k] = p.u_axis[0] * sa + p.u_axis[1] * ca;
      col_v[c * np + k] = p.v_axis[0] * sa + p.v_axis[1] * ca;
    }
  }
  for (int r = 0; r < geom.height; ++r) {
    const double el = row_to_pitch(r, geom) * kDegToRad;
    const double cp = std::cos(el), sp = std::sin(el);
    std::uint8_t* row = mask.labels.data() + std::size_t(r) * geom.width;
    for (int c = 0; c < geom.width; ++c) {
      double best = std::numeric_limits<double>::infinity();
      Label label = Label::Other;
      const double* cn = &col_n[c * np];
      const double* cu = &col_u[c * np];
      const double* cv = &col_v[c * np];
      for (std::size_t k = 0; k < np; ++k) {
        const auto& p = a.prims[k];
        const double denom = cp * cn[k] + sp * p.normal[2];
        if (denom <= 1e-12) continue;
        const double t = p.distance / denom;
        if (!(t < best)) continue;
        const double u = t * (cp * cu[k] + sp * p.u_axis[2]);
        if (u < p.u0 || u > p.u1) continue;
        const double v = t * (cp * cv[k] + sp * p.v_axis[2]);
        if (v < p.v0 || v > p.v1) continue;
        best = t;
        label = p.label;
      }
      row[c] = static_cast<std::uint8_t>(label);
    }
  }
  mask.doors = door_components(mask);
  return mask;
}

/// Depthmap whose pixel (r, c) indexes the plane hit by its center ray.
inline DepthPlaneMap render_depth(const Assembly& a, int depth_height) {
  DepthPlaneMap map;
  map.height = depth_height;
  map.width = 2 * depth_height;
  map.planes = a.planes;
  map.indices.assign(std::size_t(map.width) * map.height, 0);
  for (int r = 0; r < map.height; ++r)
    for (int c = 0; c < map.width; ++c) {
      const auto h = cast(a, depth_pixel_ray(map, {r, c}).unit_vector());
      map.indices[std::size_t(r) * map.width + c] = h.prim ? static_cast<std::uint8_t>(h.prim->plane) : 0;
    }
  return map;
}

inline Rendered render(const Scene& scene, const PanoramaGeometry& geom, int depth_height = 256) {
  if (!geom.valid()) throw Error(ErrorCode::DegenerateScene, "panorama must be 2:1 with positive size");
  const auto a = assemble(scene);
  if (a.planes.size() > 256) throw Error(ErrorCode::DegenerateScene, "more than 255 planes");
  Rendered out;
  out.geom = geom;
  out.mask = render_mask(a, geom);
  out.depth = render_depth(a, depth_height);
  out.pose = {scene.camera, scene.camera_elevation(), normalize_deg(scene.yaw_deg), scene.captured};
  out.house = destination(scene.camera, scene.facade.azimuth_deg, scene.facade.distance_m);
  out.truth.lfe = scene.door.bottom_elevation_m;
  out.truth.re = scene.road.elevation_m;
  out.truth.hdsl = out.truth.lfe - out.truth.re;
  return out;
}

// ---------------------------------------------------------------------------
// Mask fixtures

enum class Side { Left, Right };

/// Relabels the door pixels of `fraction_hidden` of the instance's columns
/// (from one side, full height) as "other" and rebuilds the instances.
inline LabelMask occlude_columns(LabelMask mask, const DoorInstance& door, double fraction_hidden,
                                 Side side = Side::Right) {
  const int cols = door.box_width();
  const int hidden = static_cast<int>(std::lround(fraction_hidden * cols));
  const int x0 = side == Side::Left ? door.x0 : door.x1 - hidden;
  for (int x = x0; x < x0 + hidden; ++x)
    for (int y = door.y0; y < door.y1; ++y)
      if (mask.at(x, y) == Label::Door) mask.set(x, y, Label::Other);
  mask.doors = door_components(mask);
  return mask;
}

/// Hides the lowest `rows` door pixels in `fraction_columns` of the
/// instance's columns (from the right).
inline LabelMask occlude_bottom(LabelMask mask, const DoorInstance& door, double fraction_columns, int rows) {
  const int cols = door.box_width();
  const int hidden = static_cast<int>(std::lround(fraction_columns * cols));
  for (int x = door.x1 - hidden; x < door.x1; ++x) {
    int erased = 0;
    for (int y = door.y1 - 1; y >= door.y0 && erased < rows; --y)
      if (mask.at(x, y) == Label::Door) { mask.set(x, y, Label::Other); ++erased; }
  }
  return mask;
}

inline LabelMask erase_label(LabelMask mask, Label label) {
  for (auto& c : mask.labels)
    if (c == static_cast<std::uint8_t>(label)) c = static_cast<std::uint8_t>(Label::Other);
  if (label == Label::Door) mask.doors.clear();
  return mask;
}

// ---------------------------------------------------------------------------
// Scene files

inline nlohmann::json facade_to_json(const FacadeSpec& f) {
  return {{"distance_m", f.distance_m}, {"azimuth_deg", f.azimuth_deg}, {"width_m", f.width_m},
          {"height_m", f.height_m}, {"lateral_offset_m", f.lateral_offset_m}};
}

inline FacadeSpec facade_from_json(const nlohmann::json& j) {
  FacadeSpec f;
  f.distance_m = j.at("distance_m").get<double>();
  f.azimuth_deg = j.at("azimuth_deg").get<double>();
  f.width_m = j.value("width_m", f.width_m);
  f.height_m = j.value("height_m", f.height_m);
  f.lateral_offset_m = j.value("lateral_offset_m", 0.0);
  return f;
}

inline nlohmann::json to_json(const Scene& s) {
  nlohmann::json neighbors = nlohmann::json::array();
  for (const auto& n : s.neighbors) neighbors.push_back(facade_to_json(n));
  return {{"pano_id", s.pano_id},
          {"house_id", s.house_id},
          {"address", s.address},
          {"captured", s.captured.str()},
          {"camera", {{"lat", s.camera.lat}, {"lon", s.camera.lon}, {"height_m", s.camera_height_m}, {"yaw_deg", s.yaw_deg}}},
          {"ground_elevation_m", s.ground_elevation_m},
          {"road", {{"near_m", s.road.near_m}, {"far_m", s.road.far_m}, {"elevation_m", s.road.elevation_m}}},
          {"grass", {{"width_m", s.grass_width_m}}},
          {"facade", facade_to_json(s.facade)},
          {"door", {{"bottom_elevation_m", s.door.bottom_elevation_m}, {"width_m", s.door.width_m},
                    {"height_m", s.door.height_m}, {"lateral_offset_m", s.door.lateral_offset_m}}},
          {"neighbors", neighbors}};
}

inline Scene scene_from_json(const nlohmann::json& j) {
  try {
    Scene s;
    s.pano_id = j.value("pano_id", s.pano_id);
    s.house_id = j.value("house_id", s.house_id);
    s.address = j.value("address", s.address);
    if (j.contains("captured")) s.captured = Date::parse(j.at("captured").get<std::string>());
    const auto& cam = j.at("camera");
    s.camera = {cam.at("lat").get<double>(), cam.at("lon").get<double>()};
    s.camera_height_m = cam.at("height_m").get<double>();
    s.yaw_deg = cam.value("yaw_deg", 0.0);
    s.ground_elevation_m = j.at("ground_elevation_m").get<double>();
    const auto& road = j.at("road");
    s.road = {road.at("near_m").get<double>(), road.at("far_m").get<double>(), road.at("elevation_m").get<double>()};
    if (j.contains("grass")) s.grass_width_m = j.at("grass").value("width_m", s.grass_width_m);
    s.facade = facade_from_json(j.at("facade"));
    const auto& d = j.at("door");
    s.door.bottom_elevation_m = d.at("bottom_elevation_m").get<double>();
    s.door.width_m = d.value("width_m", s.door.width_m);
    s.door.height_m = d.value("height_m", s.door.height_m);
    s.door.lateral_offset_m = d.value("lateral_offset_m", 0.0);
    if (j.contains("neighbors"))
      for (const auto& n : j.at("neighbors")) s.neighbors.push_back(facade_from_json(n));
    if (!s.camera.valid()) throw Error(ErrorCode::ParseError, "camera location out of range");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("scene: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepGrid {
  std::vector<double> distances_m;
  std::vector<double> camera_heights_m{2.5};
  std::vector<double> door_heights_m{1.0};  // door bottom above the road
  std::vector<int> depth_heights{256};
  std::vector<SamplingMode> modes{SamplingMode::PlaneExact, SamplingMode::NearestPixel};
  int pano_height = 4096;
  std::uint64_t seed = 1;
};

struct SweepRow {
  double distance_m = 0;
  double camera_height_m = 0;
  double door_height_m = 0;
  int depth_height = 0;
  SamplingMode mode = SamplingMode::PlaneExact;
  double yaw_deg = 0;
  Truth truth;
  double lfe = 0, re = 0, hdsl = 0;
  double lfe_abs_error = 0, re_abs_error = 0, hdsl_abs_error = 0;
  bool ok = true;
  std::string error;
};

/// Uniform double in [lo, hi) from raw engine bits, identical on every
/// standard library.
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * double(rng() >> 11) * 0x1.0p-53;
}

/// Runs the pipeline across the grid. The base scene provides everything
/// the grid does not vary; each cell gets a seeded yaw and facade bearing
/// so that pixel alignment differs from cell to cell.
inline std::vector<SweepRow> sweep(const Scene& base, const SweepGrid& grid, const PipelineOptions& opt = {}) {
  std::vector<SweepRow> rows;
  std::mt19937_64 rng(grid.seed);
  const auto geom = PanoramaGeometry::from_height(grid.pano_height);
  for (double dist : grid.distances_m)
    for (double cam : grid.camera_heights_m)
      for (double door : grid.door_heights_m)
        for (int dh : grid.depth_heights) {
          Scene s = base;
          s.facade.distance_m = dist;
          s.camera_height_m = cam;
          s.door.bottom_elevation_m = s.road.elevation_m + door;
          s.facade.azimuth_deg = uniform(rng, 0.0, 360.0);
          s.yaw_deg = normalize_deg(s.facade.azimuth_deg - 90.0 + uniform(rng, -10.0, 10.0));
          const auto r = render(s, geom, dh);
          for (auto mode : grid.modes) {
            SweepRow row;
            row.distance_m = dist;
            row.camera_height_m = cam;
            row.door_height_m = door;
            row.depth_height = dh;
            row.mode = mode;
            row.yaw_deg = s.yaw_deg;
            row.truth = r.truth;
            PipelineOptions o = opt;
            o.estimator.sampling = mode;
            try {
              const auto est = estimate_panorama(r.mask, r.depth, r.pose, r.house, o);
              row.lfe = est.lfe.value;
              row.lfe_abs_error = std::abs(row.lfe - r.truth.lfe);
              if (est.re) {
                row.re = est.re->value;
                row.re_abs_error = std::abs(row.re - r.truth.re);
                row.hdsl = *est.hdsl;
                row.hdsl_abs_error = std::abs(row.hdsl - r.truth.hdsl);
              } else {
                row.ok = false;
                row.error = std::string(to_string(*est.re_error));
              }
            } catch (const Error& e) {
              row.ok = false;
              row.error = std::string(to_string(e.code()));
            }
            rows.push_back(row);
          }
        }
  return rows;
}

}  // namespace floorline::synth
