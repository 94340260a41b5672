#include <gtest/gtest.h>

#include <random>

#include "floorline/geo.hpp"
#include "oracles.hpp"

using namespace floorline;

TEST(Bearing, CardinalDirections) {
  EXPECT_NEAR(bearing_to({10, 20}, {10.001, 20}), 0.0, 1e-9);
  EXPECT_NEAR(bearing_to({0, 20}, {0, 20.001}), 90.0, 1e-9);
  EXPECT_NEAR(bearing_to({10, 20}, {9.999, 20}), 180.0, 1e-9);
  EXPECT_NEAR(bearing_to({0, 20}, {0, 19.999}), 270.0, 1e-9);
}

TEST(Bearing, MatchesVectorOracleOnFixture) {
  const double b = bearing_to({29.6800, -95.4800}, {29.6803, -95.4797});
  EXPECT_NEAR(b, double(oracle::vector_bearing_deg(29.6800L, -95.4800L, 29.6803L, -95.4797L)), 1e-6);
}

TEST(Bearing, MatchesVectorOracleNearby) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lat(-70, 70), lon(-179, 179), az(0, 360), dist(1, 500);
  for (int i = 0; i < 10000; ++i) {
    const GeoPoint c{lat(rng), lon(rng)};
    const GeoPoint h = destination(c, az(rng), dist(rng));
    const double got = bearing_to(c, h);
    const double want = double(oracle::vector_bearing_deg(c.lat, c.lon, h.lat, h.lon));
    ASSERT_NEAR(signed_deg(got - want), 0.0, 1e-6) << c.lat << "," << c.lon;
  }
}

TEST(Bearing, CoincidentPointsRejected) {
  try {
    bearing_to({29.68, -95.48}, {29.68, -95.48});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CoincidentPoints);
  }
}

TEST(Column, StraightAheadIsCenter) {
  const PanoramaGeometry g{16384, 8192};
  EXPECT_DOUBLE_EQ(azimuth_to_column(123.0, 123.0, g).column, 8192.0);
}

TEST(Column, BehindWrapsToZero) {
  const PanoramaGeometry g{16384, 8192};
  const auto r = azimuth_to_column(180.0, 0.0, g);
  EXPECT_DOUBLE_EQ(r.column, 0.0);
  EXPECT_DOUBLE_EQ(r.delta_deg, 180.0);
}

TEST(Column, AcrossTheSeam) {
  const PanoramaGeometry g{16384, 8192};
  const auto r = azimuth_to_column(10.0, 350.0, g);
  EXPECT_NEAR(r.delta_deg, 20.0, 1e-12);
  EXPECT_NEAR(r.column, 8192.0 + 20.0 * 16384.0 / 360.0, 1e-9);
}

// Both branches of the piecewise column formula, evaluated where each
// applies.
static double piecewise_column(double house, double yaw, double w) {
  if (yaw <= house && house <= yaw + 180) return w / 2 + (house - yaw) / 360 * w;
  return w / 2 - (yaw - house) / 360 * w;
}

TEST(Column, AgreesWithBothBranchesOnTheirDomains) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ang(0, 360);
  const PanoramaGeometry g{16384, 8192};
  for (int i = 0; i < 10000; ++i) {
    const double yaw = ang(rng), house = ang(rng);
    // The piecewise form is defined for |house - yaw| <= 180 without wrap.
    if (std::abs(house - yaw) > 180) continue;
    ASSERT_NEAR(azimuth_to_column(house, yaw, g).column, std::fmod(piecewise_column(house, yaw, g.width), g.width),
                1e-6);
  }
}

TEST(Column, YawRotationEquivariance) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> ang(0, 360), shift(-720, 720);
  const PanoramaGeometry g{4096, 2048};
  for (int i = 0; i < 2000; ++i) {
    const double yaw = ang(rng), house = ang(rng), d = shift(rng);
    const double a = azimuth_to_column(house, yaw, g).column;
    const double b = azimuth_to_column(house + d, yaw + d, g).column;
    const double diff = std::abs(a - b);
    ASSERT_LT(std::min(diff, g.width - diff), 1e-7);
  }
}

TEST(Pitch, RowConversions) {
  const PanoramaGeometry g{16384, 8192};
  EXPECT_DOUBLE_EQ(row_to_pitch(4096, g), 0.0);
  EXPECT_DOUBLE_EQ(row_to_pitch(2048, g), 45.0);
  EXPECT_DOUBLE_EQ(row_to_pitch(6144, g), -45.0);
  EXPECT_EQ(pitch_to_row(0.0, g), 4096);
  EXPECT_EQ(pitch_to_row(90.0, g), 0);
  EXPECT_THROW(row_to_pitch(8192, g), Error);
  EXPECT_THROW(row_to_pitch(-1, g), Error);
  EXPECT_THROW(pitch_to_row(-90.0, g), Error);
  EXPECT_THROW(pitch_to_row(91.0, g), Error);
}

TEST(Pitch, RoundTripWithinHalfPixel) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> p(-89.9, 90.0);
  const PanoramaGeometry g{2048, 1024};
  const double half = 180.0 / (2.0 * g.height);
  for (int i = 0; i < 10000; ++i) {
    const double theta = p(rng);
    ASSERT_LE(std::abs(row_to_pitch(pitch_to_row(theta, g), g) - theta), half + 1e-12);
  }
}

TEST(HeightOffset, ClosedFormValues) {
  EXPECT_NEAR(height_offset(10, -30), -5.0, 1e-12);
  EXPECT_EQ(height_offset(3.7, 0), 0.0);
}

TEST(HeightOffset, MatchesTaylorSine) {
  const long double want = 7.07L * oracle::taylor_sin(45.0L * oracle::kPi / 180.0L);
  EXPECT_NEAR(height_offset(7.07, 45.0), double(want), 1e-12);
  EXPECT_NEAR(height_offset(7.07, 45.0), 4.99924, 1e-5);
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> d(0, 100), p(-90, 90);
  for (int i = 0; i < 1000; ++i) {
    const double dd = d(rng), pp = p(rng);
    ASSERT_NEAR(height_offset(dd, pp), double(dd * oracle::taylor_sin(pp * oracle::kPi / 180.0L)), 1e-11);
  }
}

TEST(Windows, PrimaryThenShifted) {
  auto w = search_windows(90.0);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_DOUBLE_EQ(w[0].start_deg, 45.0);
  EXPECT_DOUBLE_EQ(w[0].end_deg(), 135.0);
  EXPECT_DOUBLE_EQ(w[1].start_deg, 22.5);
  EXPECT_DOUBLE_EQ(w[1].end_deg(), 112.5);
  EXPECT_DOUBLE_EQ(w[2].start_deg, 67.5);
  EXPECT_DOUBLE_EQ(w[2].end_deg(), 157.5);
  w = search_windows(0.0);
  EXPECT_DOUBLE_EQ(w[0].start_deg, 315.0);
  EXPECT_DOUBLE_EQ(w[0].end_deg(), 45.0);
  EXPECT_TRUE(w[0].contains(0.0));
  EXPECT_FALSE(w[0].contains(180.0));
}

TEST(Windows, UnionCoversAtMost135Degrees) {
  for (double b = 0; b < 360; b += 7.3) {
    const auto w = search_windows(b);
    int covered = 0;
    for (int i = 0; i < 3600; ++i) {
      const double a = i / 10.0;
      covered += w[0].contains(a) || w[1].contains(a) || w[2].contains(a);
    }
    ASSERT_LE(covered, 1351);
  }
}

TEST(Windows, ColumnSpanMatchesPerColumnTest) {
  const PanoramaGeometry g{720, 360};
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ang(0, 360);
  for (int i = 0; i < 200; ++i) {
    const double yaw = ang(rng);
    const AzimuthWindow w{ang(rng), 90.0};
    const auto span = window_columns(w, yaw, g);
    for (int c = 0; c < g.width; ++c) {
      const bool inside = w.contains(normalize_deg(column_to_azimuth(c, g) + yaw));
      ASSERT_EQ(span.contains(c), inside) << "col " << c;
    }
  }
}

TEST(Destination, InvertsDistanceAndBearing) {
  const GeoPoint c{29.68, -95.48};
  const auto h = destination(c, 37.0, 25.0);
  EXPECT_NEAR(distance_m(c, h), 25.0, 1e-6);
  EXPECT_NEAR(bearing_to(c, h), 37.0, 1e-6);
}
