#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "floorline/extraction.hpp"
#include "floorline/label_mask.hpp"
#include "floorline/synth.hpp"

using namespace floorline;
namespace fs = std::filesystem;

namespace {

std::map<int, int> brute_bottoms(const LabelMask& m, const DoorInstance& d) {
  std::map<int, int> out;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (x >= d.x0 && x < d.x1 && y >= d.y0 && y < d.y1 && m.at(x, y) == Label::Door)
        out[x] = std::max(out.count(x) ? out[x] : -1, y);
  return out;
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("floorline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(DoorBottom, RectangleBottomEdge) {
  LabelMask m(400, 200);
  m.fill_rect(50, 100, 60, 120, Label::Door);
  m.doors = door_components(m);
  ASSERT_EQ(m.doors.size(), 1u);
  const auto t = door_bottom(m, m.doors[0]);
  ASSERT_EQ(t.pixels.size(), 10u);
  for (const auto& p : t.pixels) EXPECT_EQ(p.y, 119);
}

TEST(DoorBottom, ShearedDoorMatchesBruteForce) {
  LabelMask m(400, 200);
  for (int y = 80; y < 130; ++y)
    for (int x = 0; x < 14; ++x) m.set(100 + x + (y - 80) / 3, y, Label::Door);
  m.doors = door_components(m);
  const auto t = trace_door_bottom(m, m.doors[0]);
  const auto want = brute_bottoms(m, m.doors[0]);
  ASSERT_EQ(t.pixels.size(), want.size());
  for (const auto& p : t.pixels) EXPECT_EQ(want.at(p.x), p.y);
}

TEST(DoorBottom, RandomBlobsMatchBruteForce) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    LabelMask m(120, 60);
    std::uniform_int_distribution<int> x(1, 110), y(1, 50);
    for (int k = 0; k < 6; ++k) m.fill_rect(x(rng), y(rng), x(rng) % 10 + x(rng), y(rng) % 9 + y(rng), Label::Door);
    m.doors = door_components(m);
    for (const auto& d : m.doors) {
      const auto t = trace_door_bottom(m, d);
      const auto want = brute_bottoms(m, d);
      ASSERT_EQ(t.pixels.size(), want.size());
      for (const auto& p : t.pixels) ASSERT_EQ(want.at(p.x), p.y);
    }
  }
}

TEST(DoorBottom, EmptyInstanceRejected) {
  LabelMask m(40, 20);
  try {
    trace_door_bottom(m, {0, 5, 5, 10, 10});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInstance);
  }
}

TEST(DoorBottom, RenderedDoorWithinOneRowOfAnalyticEdge) {
  synth::Scene s;
  s.facade.distance_m = 10.0;
  s.facade.azimuth_deg = 90.0;
  s.yaw_deg = 0.0;
  s.camera_height_m = 2.5;
  s.door.bottom_elevation_m = s.ground_elevation_m;
  const auto geom = PanoramaGeometry::from_height(2048);
  const auto r = synth::render(s, geom, 64);
  ASSERT_EQ(r.mask.doors.size(), 1u);
  const auto t = trace_door_bottom(r.mask, r.mask.doors[0]);
  const double ce = s.camera_elevation();
  for (const auto& p : t.pixels) {
    const double az = column_to_azimuth(p.x, geom) * kDegToRad;
    const double horiz = 10.0 / std::cos(az - 90.0 * kDegToRad);
    const double pitch = -std::atan((ce - s.door.bottom_elevation_m) / horiz) * kRadToDeg;
    ASSERT_LE(std::abs(p.y - pitch_to_row(pitch, geom)), 1) << p.x;
  }
  // Head-on column: the closed-form pitch.
  EXPECT_NEAR(-std::atan(2.5 / 10.0) * kRadToDeg, -14.036, 1e-3);
}

TEST(Visibility, UnclippedRectangleIsComplete) {
  LabelMask m(400, 200);
  m.fill_rect(100, 60, 109, 80, Label::Door);
  m.doors = door_components(m);
  const auto t = door_bottom(m, m.doors[0]);
  EXPECT_EQ(t.visibility, Visibility::Complete);
  EXPECT_EQ(t.visible_fraction, 1.0);
}

TEST(Visibility, HalfColumnsBottomOccludedIsHalf) {
  LabelMask m(400, 200);
  m.fill_rect(100, 60, 120, 104, Label::Door);  // 20 x 44: expected width 19.8
  m.doors = door_components(m);
  const auto occluded = synth::occlude_bottom(m, m.doors[0], 0.5, 12);
  const auto t = door_bottom(occluded, occluded.doors[0]);
  EXPECT_EQ(t.visibility, Visibility::Partial);
  EXPECT_EQ(t.visible_fraction, 0.5);
}

TEST(Visibility, SideOcclusionFractions) {
  for (const auto [hidden, want] : {std::pair{0.25, 0.75}, {0.5, 0.5}, {0.75, 0.25}}) {
    LabelMask m(400, 200);
    m.fill_rect(100, 60, 140, 149, Label::Door);  // 40 x 89
    m.doors = door_components(m);
    const auto occluded = synth::occlude_columns(m, m.doors[0], hidden);
    const auto t = door_bottom(occluded, occluded.doors[0]);
    EXPECT_EQ(t.visibility, Visibility::Partial) << hidden;
    EXPECT_EQ(t.visible_fraction, want) << hidden;
  }
}

TEST(Visibility, TouchingWindowEdgeIsPartial) {
  LabelMask m(400, 200);
  m.fill_rect(100, 60, 109, 80, Label::Door);
  m.doors = door_components(m);
  const ColumnSpan span{104, 50, 400};
  const auto t = door_bottom(m, m.doors[0], span);
  EXPECT_TRUE(t.clipped);
  EXPECT_EQ(t.visibility, Visibility::Partial);
  for (const auto& p : t.pixels) EXPECT_TRUE(span.contains(p.x));
}

TEST(Visibility, TouchingMaskBorderIsPartial) {
  LabelMask m(400, 200);
  m.fill_rect(0, 60, 9, 80, Label::Door);
  m.doors = door_components(m);
  EXPECT_EQ(door_bottom(m, m.doors[0]).visibility, Visibility::Partial);
}

// ---------------------------------------------------------------------------
// Roadside

TEST(Roadside, TopmostRoadRowPerColumn) {
  LabelMask m(16384, 8192);
  m.fill_rect(7000, 5000, 7100, 5800, Label::Road);
  m.fill_rect(7000, 5800, 7100, 8192, Label::Grass);
  const auto t = roadside(m, {7000, 100, m.width});
  EXPECT_EQ(t.feature, Label::Road);
  ASSERT_EQ(t.pixels.size(), 100u);
  for (const auto& p : t.pixels) {
    EXPECT_EQ(p.y, 5000);
    EXPECT_EQ(m.at(p.x, p.y), Label::Road);
  }
}

TEST(Roadside, GrassFallbackOffsetBelowEdge) {
  LabelMask m(16384, 8192);
  m.fill_rect(7000, 4500, 7100, 5000, Label::Grass);
  const auto t = roadside(m, {7000, 100, m.width});
  EXPECT_EQ(t.feature, Label::Grass);
  EXPECT_EQ(t.offset_applied, 20);
  for (const auto& p : t.pixels) {
    EXPECT_EQ(p.y, 5019);
    EXPECT_EQ(m.at(p.x, p.y - 20), Label::Grass);
  }
}

TEST(Roadside, OffsetScalesWithHeight) {
  EXPECT_EQ(scaled_offset(20, 8192), 20);
  EXPECT_EQ(scaled_offset(20, 4096), 10);
  EXPECT_EQ(scaled_offset(20, 1024), 3);
}

TEST(Roadside, SparseRoadFallsBackToGrass) {
  LabelMask m(800, 400);
  m.fill_rect(100, 300, 140, 310, Label::Road);  // 40 of 100 columns
  m.fill_rect(100, 250, 200, 260, Label::Grass);
  const auto t = roadside(m, {100, 100, m.width});
  EXPECT_EQ(t.feature, Label::Grass);
}

TEST(Roadside, RoadAboveHorizonIgnored) {
  LabelMask m(800, 400);
  m.fill_rect(100, 50, 200, 60, Label::Road);
  m.fill_rect(100, 300, 200, 320, Label::Dirt);
  const auto t = roadside(m, {100, 100, m.width});
  EXPECT_EQ(t.feature, Label::Dirt);
}

TEST(Roadside, NothingInWindow) {
  LabelMask m(800, 400);
  m.fill_rect(500, 300, 600, 320, Label::Road);
  try {
    roadside(m, {100, 100, m.width});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoRoadsideFeature);
  }
}

TEST(Roadside, RenderedRoadErasedUsesGrass) {
  synth::Scene s;
  s.yaw_deg = 0;
  s.facade.azimuth_deg = 90;
  const auto geom = PanoramaGeometry::from_height(1024);
  const auto r = synth::render(s, geom, 64);
  const auto span = window_columns({45, 90}, 0.0, geom);
  EXPECT_EQ(roadside(r.mask, span).feature, Label::Road);
  const auto erased = synth::erase_label(r.mask, Label::Road);
  const auto t = roadside(erased, span);
  EXPECT_EQ(t.feature, Label::Grass);
  for (const auto& p : t.pixels) EXPECT_EQ(erased.at(p.x, p.y - t.offset_applied), Label::Grass);
}

TEST(Traces, RotationShiftsColumns) {
  LabelMask m(720, 360);
  m.fill_rect(300, 150, 320, 200, Label::Door);
  m.fill_rect(250, 230, 400, 260, Label::Road);
  m.doors = door_components(m);
  const int k = 137;
  LabelMask rot(720, 360);
  for (int y = 0; y < 360; ++y)
    for (int x = 0; x < 720; ++x) rot.set((x + k) % 720, y, m.at(x, y));
  rot.doors = door_components(rot);
  const ColumnSpan span{260, 120, 720}, span_rot{260 + k, 120, 720};
  const auto a = door_bottom(m, m.doors[0], span), b = door_bottom(rot, rot.doors[0], span_rot);
  ASSERT_EQ(a.pixels.size(), b.pixels.size());
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    EXPECT_EQ((a.pixels[i].x + k) % 720, b.pixels[i].x);
    EXPECT_EQ(a.pixels[i].y, b.pixels[i].y);
  }
  const auto ra = roadside(m, span), rb = roadside(rot, span_rot);
  ASSERT_EQ(ra.pixels.size(), rb.pixels.size());
  for (std::size_t i = 0; i < ra.pixels.size(); ++i) EXPECT_EQ((ra.pixels[i].x + k) % 720, rb.pixels[i].x);
}

// ---------------------------------------------------------------------------
// Mask files

TEST(MaskFiles, PngAndSidecarRoundTrip) {
  const auto dir = temp_dir("mask_rt");
  LabelMask m(64, 32);
  m.fill_rect(10, 5, 14, 15, Label::Door);
  m.fill_rect(30, 8, 33, 20, Label::Door);
  m.fill_rect(0, 20, 64, 26, Label::Road);
  m.fill_rect(0, 26, 64, 32, Label::Grass);
  m.set(5, 5, Label::Dirt);
  m.doors = door_components(m);
  save_mask(m, dir / "mask.png", dir / "mask.json");
  EXPECT_EQ(load_mask(dir / "mask.png", dir / "mask.json"), m);
  // Without a sidecar the instances come from connected components.
  fs::remove(dir / "mask.json");
  EXPECT_EQ(load_mask(dir / "mask.png", dir / "mask.json").doors, m.doors);
}

TEST(MaskFiles, UnknownCodeIsSchemaError) {
  const auto dir = temp_dir("mask_bad");
  png::Image img{8, 4, 1, std::vector<std::uint8_t>(32, 0)};
  img.pixels[3] = 9;
  png::write(dir / "mask.png", img);
  try {
    load_mask(dir / "mask.png", dir / "mask.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaError);
  }
}

TEST(MaskFiles, SidecarBoxWithoutDoorPixelsIsSchemaError) {
  const auto dir = temp_dir("mask_box");
  LabelMask m(16, 8);
  png::write(dir / "mask.png", {16, 8, 1, m.labels});
  std::ofstream(dir / "mask.json") << R"({"width":16,"height":8,"doors":[{"id":0,"x0":1,"y0":1,"x1":3,"y1":3}]})";
  EXPECT_THROW(load_mask(dir / "mask.png", dir / "mask.json"), Error);
}

TEST(MaskFiles, SidecarDimensionMismatchIsSchemaError) {
  const auto dir = temp_dir("mask_dim");
  LabelMask m(16, 8);
  png::write(dir / "mask.png", {16, 8, 1, m.labels});
  std::ofstream(dir / "mask.json") << R"({"width":32,"height":8,"doors":[]})";
  EXPECT_THROW(load_mask(dir / "mask.png", dir / "mask.json"), Error);
}
