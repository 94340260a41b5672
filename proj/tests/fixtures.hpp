#pragma once

#include <cmath>

#include "floorline/depth_codec.hpp"
#include "floorline/estimator.hpp"
#include "floorline/label_mask.hpp"

namespace fixture {

struct Rotated {
  floorline::LabelMask mask;
  floorline::DepthPlaneMap depth;
  floorline::CameraPose pose;
};

/// Shifts mask and depth columns right by `kd` depth pixels, turns the plane
/// normals with them and backs the yaw off by the same angle, so the world
/// seen by the camera is unchanged.
inline Rotated rotate_assets(const floorline::LabelMask& mask, const floorline::DepthPlaneMap& depth,
                             const floorline::CameraPose& pose, int kd) {
  using namespace floorline;
  const int k = kd * mask.width / depth.width;
  const double delta = kd * 360.0 / depth.width;
  Rotated out{LabelMask(mask.width, mask.height), depth, pose};
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) out.mask.set((x + k) % mask.width, y, mask.at(x, y));
  out.mask.doors = door_components(out.mask);
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x)
      out.depth.indices[std::size_t(y) * depth.width + (x + kd) % depth.width] = depth.index_at(y, x);
  for (std::size_t i = 1; i < out.depth.planes.size(); ++i) {
    auto& n = out.depth.planes[i].normal;
    const double h = std::hypot(double(n[0]), double(n[1]));
    if (h == 0) continue;
    const double phi = std::atan2(double(n[0]), double(n[1])) + delta * kDegToRad;
    n[0] = float(h * std::sin(phi));
    n[1] = float(h * std::cos(phi));
  }
  out.pose.yaw_deg = normalize_deg(pose.yaw_deg - delta);
  return out;
}

}  // namespace fixture
