#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "floorline/error.hpp"
#include "floorline/geo.hpp"
#include "floorline/label_mask.hpp"

namespace floorline {

enum class Visibility { Complete, Partial };

inline const char* visibility_name(Visibility v) { return v == Visibility::Complete ? "complete" : "partial"; }

struct DoorBottomTrace {
  std::vector<Pixel> pixels;  // one per column, ascending x
  int instance_id = -1;
  Visibility visibility = Visibility::Complete;
  double visible_fraction = 1.0;
  bool clipped = false;  // instance extends past the window or touches the mask border
};

struct VisibilityOptions {
  double door_aspect = 0.45;        // width / height of a typical front door
  double complete_ratio = 0.875;    // traced / expected width needed for "complete"
  double jump_fraction = 0.05;      // bottom-edge step (of instance height) that breaks the edge
  int min_jump_px = 2;
};

struct VisibilityResult {
  Visibility visibility = Visibility::Complete;
  double fraction = 1.0;
  int visible_columns = 0;
  double expected_width = 0.0;
  bool broken = false;
  bool clipped = false;
};

/// Lowest door pixel of every column of the instance (restricted to
/// `span` when given).
inline DoorBottomTrace trace_door_bottom(const LabelMask& mask, const DoorInstance& door,
                                         const std::optional<ColumnSpan>& span = std::nullopt) {
  DoorBottomTrace trace;
  trace.instance_id = door.id;
  bool outside = false;
  for (int x = door.x0; x < door.x1; ++x) {
    int bottom = -1;
    for (int y = door.y1 - 1; y >= door.y0; --y)
      if (mask.at(x, y) == Label::Door) { bottom = y; break; }
    if (bottom < 0) continue;
    if (span && !span->contains(x)) { outside = true; continue; }
    trace.pixels.push_back({x, bottom});
  }
  if (trace.pixels.empty()) throw Error(ErrorCode::EmptyInstance, "door instance " + std::to_string(door.id) + " has no traceable pixels");
  trace.clipped = outside || door.x0 == 0 || door.x1 == mask.width || door.y0 == 0 || door.y1 == mask.height;
  return trace;
}

/// Complete when the bottom edge is one unbroken run, is not clipped and
/// spans at least `complete_ratio` of the width expected from the door's
/// height. Otherwise partial, with the visible share of the expected width
/// quantized to 0.25 / 0.50 / 0.75.
inline VisibilityResult classify_visibility(const DoorInstance& door, const DoorBottomTrace& trace,
                                            const VisibilityOptions& opt = {}) {
  VisibilityResult r;
  const auto& px = trace.pixels;
  if (px.empty()) return r;
  const int jump = std::max(opt.min_jump_px, static_cast<int>(std::lround(opt.jump_fraction * door.box_height())));

  // Split into runs at column gaps or bottom-edge steps; keep the lowest run.
  int best_len = 0;
  double best_mean = -1.0;
  int segments = 0;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= px.size(); ++i) {
    const bool cut = i == px.size() || px[i].x != px[i - 1].x + 1 || std::abs(px[i].y - px[i - 1].y) > jump;
    if (!cut) continue;
    ++segments;
    double sum = 0;
    for (std::size_t k = begin; k < i; ++k) sum += px[k].y;
    const double mean = sum / double(i - begin);
    if (mean > best_mean) { best_mean = mean; best_len = static_cast<int>(i - begin); }
    begin = i;
  }

  r.broken = segments > 1;
  r.clipped = trace.clipped;
  r.visible_columns = best_len;
  const double span = px.back().x - px.front().x + 1;
  r.expected_width = std::max(span, opt.door_aspect * door.box_height());
  const double ratio = std::min(1.0, r.visible_columns / r.expected_width);
  if (!r.broken && !r.clipped && ratio >= opt.complete_ratio) return r;
  r.visibility = Visibility::Partial;
  r.fraction = ratio < 0.375 ? 0.25 : ratio < 0.625 ? 0.50 : 0.75;
  return r;
}

inline DoorBottomTrace door_bottom(const LabelMask& mask, const DoorInstance& door,
                                   const std::optional<ColumnSpan>& span = std::nullopt,
                                   const VisibilityOptions& opt = {}) {
  auto trace = trace_door_bottom(mask, door, span);
  const auto v = classify_visibility(door, trace, opt);
  trace.visibility = v.visibility;
  trace.visible_fraction = v.fraction;
  return trace;
}

/// Number of instance columns that fall inside the span.
inline int door_columns_in_span(const LabelMask& mask, const DoorInstance& door, const ColumnSpan& span) {
  int n = 0;
  for (int x = door.x0; x < door.x1; ++x) {
    if (!span.contains(x)) continue;
    for (int y = door.y0; y < door.y1; ++y)
      if (mask.at(x, y) == Label::Door) { ++n; break; }
  }
  return n;
}

/// Door instance inside the span whose center lies closest to `column`.
inline std::optional<DoorInstance> door_in_span(const LabelMask& mask, const ColumnSpan& span, double column) {
  std::optional<DoorInstance> best;
  double best_dist = 0;
  for (const auto& d : mask.doors) {
    if (door_columns_in_span(mask, d, span) == 0) continue;
    double dist = std::abs((d.x0 + d.x1) / 2.0 - column);
    dist = std::min(dist, mask.width - dist);
    if (!best || dist < best_dist) { best = d; best_dist = dist; }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Roadside

struct RoadsideTrace {
  std::vector<Pixel> pixels;  // one per column, window order
  Label feature = Label::Road;
  int offset_applied = 0;
};

struct RoadsideOptions {
  int offset_px = 20;            // at a panorama height of 8192, scaled to the actual height
  double min_coverage = 0.5;     // share of window columns a feature must cover
};

inline int scaled_offset(int offset_px, int height) {
  return static_cast<int>(std::lround(offset_px * double(height) / 8192.0));
}

/// House-side roadside edge inside the window. Road pixels give the edge
/// directly (topmost road pixel below the horizon); grass and dirt are
/// fallbacks whose nearest edge (bottommost pixel) is pushed down by the
/// configured offset.
inline RoadsideTrace roadside(const LabelMask& mask, const ColumnSpan& span, const RoadsideOptions& opt = {}) {
  const int horizon = mask.height / 2;
  auto topmost = [&](int x, Label l) -> int {
    for (int y = horizon; y < mask.height; ++y)
      if (mask.at(x, y) == l) return y;
    return -1;
  };
  auto bottommost = [&](int x, Label l) -> int {
    for (int y = mask.height - 1; y >= horizon; --y)
      if (mask.at(x, y) == l) return y;
    return -1;
  };

  auto build = [&](Label feature) {
    RoadsideTrace t;
    t.feature = feature;
    t.offset_applied = feature == Label::Road ? 0 : scaled_offset(opt.offset_px, mask.height);
    for (int i = 0; i < span.count; ++i) {
      const int x = span.at(i);
      if (feature == Label::Road) {
        const int y = topmost(x, Label::Road);
        if (y >= 0) t.pixels.push_back({x, y});
      } else {
        const int y = bottommost(x, feature);
        if (y >= 0 && y + t.offset_applied < mask.height) t.pixels.push_back({x, y + t.offset_applied});
      }
    }
    return t;
  };

  const Label order[3] = {Label::Road, Label::Grass, Label::Dirt};
  std::optional<RoadsideTrace> first_nonempty;
  for (auto f : order) {
    auto t = build(f);
    if (t.pixels.empty()) continue;
    if (double(t.pixels.size()) >= opt.min_coverage * span.count) return t;
    if (!first_nonempty) first_nonempty = std::move(t);
  }
  if (first_nonempty) return *first_nonempty;
  throw Error(ErrorCode::NoRoadsideFeature, "no road, grass or dirt pixels in window");
}

}  // namespace floorline
