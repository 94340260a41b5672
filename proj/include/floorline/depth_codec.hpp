#pragma once

// Plane-encoded panorama depthmaps.
//
// Byte layout (little endian), after base64url decoding and optional zlib
// inflation:
//
//   offset 0  u8   header_size (always 8)
//   offset 1  u16  plane_count
//   offset 3  u16  width
//   offset 5  u16  height
//   offset 7  u8   pad (written as 8, ignored on read)
//   offset 8  u8[height * width]   plane index per pixel, row-major, row 0 = top
//   then      plane_count * {f32 nx, f32 ny, f32 nz, f32 distance}
//
// Plane 0 is the "no surface" slot: pixels indexed 0 carry no depth and the
// contents of plane 0 are never read.
//
// Camera frame: x right, y forward (the heading at panorama column W/2),
// z up. With zero yaw this is east/north/up. Azimuth grows clockwise from
// the heading, pitch is positive above the horizon.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "floorline/error.hpp"
#include "json.hpp"

namespace floorline {

struct Plane {
  std::array<float, 3> normal{0.0f, 0.0f, 1.0f};
  float distance = 0.0f;

  bool operator==(const Plane& other) const {
    // Bitwise comparison so that round-trip checks are exact at f32.
    return std::bit_cast<std::uint32_t>(normal[0]) == std::bit_cast<std::uint32_t>(other.normal[0]) &&
           std::bit_cast<std::uint32_t>(normal[1]) == std::bit_cast<std::uint32_t>(other.normal[1]) &&
           std::bit_cast<std::uint32_t>(normal[2]) == std::bit_cast<std::uint32_t>(other.normal[2]) &&
           std::bit_cast<std::uint32_t>(distance) == std::bit_cast<std::uint32_t>(other.distance);
  }
};

struct DepthPlaneMap {
  int width = 0;
  int height = 0;
  std::vector<Plane> planes;          // planes[0] is the "no surface" slot
  std::vector<std::uint8_t> indices;  // height * width, row-major

  std::size_t plane_count() const { return planes.size(); }

  std::uint8_t index_at(int row, int col) const {
    return indices[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                   static_cast<std::size_t>(col)];
  }

  bool operator==(const DepthPlaneMap&) const = default;
};

inline constexpr double kUnitNormalTolerance = 1e-5;
inline constexpr double kMinDenominator = 1e-6;

/// Throws InvariantViolation (or InvalidPlaneIndex for out-of-table
/// indices) when the map breaks any of its structural invariants.
inline void validate(const DepthPlaneMap& map) {
  if (map.width <= 0 || map.height <= 0 || map.width > 0xFFFF || map.height > 0xFFFF)
    throw Error(ErrorCode::InvariantViolation, "depthmap dimensions out of range");
  if (map.planes.empty() || map.planes.size() > 0xFFFF)
    throw Error(ErrorCode::InvariantViolation, "plane table must hold 1..65535 planes");
  if (map.indices.size() != static_cast<std::size_t>(map.width) * static_cast<std::size_t>(map.height))
    throw Error(ErrorCode::InvariantViolation, "index grid size != width*height");
  for (std::size_t i = 1; i < map.planes.size(); ++i) {
    const auto& p = map.planes[i];
    const double len = std::sqrt(double(p.normal[0]) * p.normal[0] + double(p.normal[1]) * p.normal[1] +
                                 double(p.normal[2]) * p.normal[2]);
    if (!(std::abs(len - 1.0) <= kUnitNormalTolerance))
      throw Error(ErrorCode::InvariantViolation, "plane " + std::to_string(i) + " normal is not unit length");
    if (!std::isfinite(p.distance) || p.distance < 0.0f)
      throw Error(ErrorCode::InvariantViolation, "plane " + std::to_string(i) + " distance must be finite and >= 0");
  }
  const auto count = map.planes.size();
  for (auto idx : map.indices)
    if (idx >= count)
      throw Error(ErrorCode::InvalidPlaneIndex,
                  "index " + std::to_string(idx) + " >= plane_count " + std::to_string(count));
}

namespace detail {

inline constexpr std::string_view kBase64UrlAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

inline int base64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '-' || c == '+') return 62;
  if (c == '_' || c == '/') return 63;
  return -1;
}

inline void put_u16(std::vector<std::uint8_t>& out, std::size_t at, unsigned v) {
  out[at] = static_cast<std::uint8_t>(v & 0xFF);
  out[at + 1] = static_cast<std::uint8_t>((v >> 8) & 0xFF);
}

inline unsigned get_u16(const std::vector<std::uint8_t>& in, std::size_t at) {
  return unsigned(in[at]) | (unsigned(in[at + 1]) << 8);
}

inline void put_f32(std::vector<std::uint8_t>& out, std::size_t at, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int b = 0; b < 4; ++b) out[at + b] = static_cast<std::uint8_t>((bits >> (8 * b)) & 0xFF);
}

inline float get_f32(const std::vector<std::uint8_t>& in, std::size_t at) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= std::uint32_t(in[at + b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

inline bool looks_like_zlib(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2) return false;
  const unsigned cmf = bytes[0], flg = bytes[1];
  return (cmf & 0x0F) == 8 && (cmf >> 4) <= 7 && ((cmf << 8) | flg) % 31 == 0;
}

}  // namespace detail

/// RFC 4648 section 5 encoding without padding.
inline std::string base64url_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (std::uint32_t(bytes[i]) << 16) | (std::uint32_t(bytes[i + 1]) << 8) | bytes[i + 2];
    out += detail::kBase64UrlAlphabet[(v >> 18) & 63];
    out += detail::kBase64UrlAlphabet[(v >> 12) & 63];
    out += detail::kBase64UrlAlphabet[(v >> 6) & 63];
    out += detail::kBase64UrlAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = std::uint32_t(bytes[i]) << 16;
    out += detail::kBase64UrlAlphabet[(v >> 18) & 63];
    out += detail::kBase64UrlAlphabet[(v >> 12) & 63];
  } else if (rest == 2) {
    const std::uint32_t v = (std::uint32_t(bytes[i]) << 16) | (std::uint32_t(bytes[i + 1]) << 8);
    out += detail::kBase64UrlAlphabet[(v >> 18) & 63];
    out += detail::kBase64UrlAlphabet[(v >> 12) & 63];
    out += detail::kBase64UrlAlphabet[(v >> 6) & 63];
  }
  return out;
}

/// Accepts the URL-safe alphabet (and tolerates '+' '/'), optional '='
/// padding and surrounding whitespace.
inline std::vector<std::uint8_t> base64url_decode(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  std::size_t end = text.size();
  while (end > 0 && text[end - 1] == '=') --end;
  if (text.size() - end > 2) throw Error(ErrorCode::MalformedEncoding, "too much base64 padding");
  const auto body = text.substr(0, end);
  if (body.size() % 4 == 1) throw Error(ErrorCode::MalformedEncoding, "truncated base64 quantum");
  if (end != text.size() && text.size() % 4 != 0)
    throw Error(ErrorCode::MalformedEncoding, "padded base64 length is not a multiple of 4");

  std::vector<std::uint8_t> out;
  out.reserve(body.size() * 3 / 4);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : body) {
    const int v = detail::base64_value(c);
    if (v < 0) throw Error(ErrorCode::MalformedEncoding, std::string("invalid base64 character '") + c + "'");
    acc = (acc << 6) | std::uint32_t(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

inline std::vector<std::uint8_t> zlib_inflate(const std::vector<std::uint8_t>& in) {
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw Error(ErrorCode::MalformedEncoding, "inflateInit failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk{};
  int rc = Z_OK;
  do {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(ErrorCode::MalformedEncoding, "zlib stream is corrupt");
    }
    out.insert(out.end(), chunk.begin(), chunk.begin() + (chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw Error(ErrorCode::MalformedEncoding, "zlib stream is truncated");
    }
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

inline std::vector<std::uint8_t> zlib_deflate(const std::vector<std::uint8_t>& in) {
  uLongf bound = compressBound(static_cast<uLong>(in.size()));
  std::vector<std::uint8_t> out(bound);
  if (compress2(out.data(), &bound, in.data(), static_cast<uLong>(in.size()), 9) != Z_OK)
    throw Error(ErrorCode::MalformedEncoding, "zlib compression failed");
  out.resize(bound);
  return out;
}

/// Header + payload bytes, uncompressed.
inline std::vector<std::uint8_t> serialize_depthmap(const DepthPlaneMap& map) {
  validate(map);
  const std::size_t pixels = map.indices.size();
  std::vector<std::uint8_t> bytes(8 + pixels + 16 * map.planes.size());
  bytes[0] = 8;
  detail::put_u16(bytes, 1, static_cast<unsigned>(map.planes.size()));
  detail::put_u16(bytes, 3, static_cast<unsigned>(map.width));
  detail::put_u16(bytes, 5, static_cast<unsigned>(map.height));
  bytes[7] = 8;
  std::memcpy(bytes.data() + 8, map.indices.data(), pixels);
  std::size_t at = 8 + pixels;
  for (const auto& p : map.planes) {
    detail::put_f32(bytes, at, p.normal[0]);
    detail::put_f32(bytes, at + 4, p.normal[1]);
    detail::put_f32(bytes, at + 8, p.normal[2]);
    detail::put_f32(bytes, at + 12, p.distance);
    at += 16;
  }
  return bytes;
}

inline DepthPlaneMap parse_depthmap(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8) throw Error(ErrorCode::HeaderMismatch, "payload shorter than the 8-byte header");
  if (bytes[0] != 8)
    throw Error(ErrorCode::HeaderMismatch, "header size is " + std::to_string(bytes[0]) + ", expected 8");
  DepthPlaneMap map;
  const unsigned plane_count = detail::get_u16(bytes, 1);
  map.width = static_cast<int>(detail::get_u16(bytes, 3));
  map.height = static_cast<int>(detail::get_u16(bytes, 5));
  const std::size_t pixels = std::size_t(map.width) * std::size_t(map.height);
  const std::size_t needed = 8 + pixels + 16 * std::size_t(plane_count);
  if (bytes.size() < needed)
    throw Error(ErrorCode::HeaderMismatch, "payload has " + std::to_string(bytes.size()) + " bytes, header promises " +
                                               std::to_string(needed));
  if (map.width == 0 || map.height == 0 || plane_count == 0)
    throw Error(ErrorCode::HeaderMismatch, "header declares an empty depthmap");
  map.indices.assign(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(pixels));
  map.planes.resize(plane_count);
  std::size_t at = 8 + pixels;
  for (auto& p : map.planes) {
    p.normal = {detail::get_f32(bytes, at), detail::get_f32(bytes, at + 4), detail::get_f32(bytes, at + 8)};
    p.distance = detail::get_f32(bytes, at + 12);
    at += 16;
  }
  validate(map);
  return map;
}

inline DepthPlaneMap decode_depthmap(std::string_view encoded) {
  auto bytes = base64url_decode(encoded);
  if (detail::looks_like_zlib(bytes)) bytes = zlib_inflate(bytes);
  return parse_depthmap(bytes);
}

/// Inverse of decode_depthmap: zlib container, base64url without padding.
inline std::string encode_depthmap(const DepthPlaneMap& map) {
  return base64url_encode(zlib_deflate(serialize_depthmap(map)));
}

// ---------------------------------------------------------------------------
// Sampling

enum class SamplingMode { PlaneExact, NearestPixel };

struct RayDirection {
  double azimuth_deg = 0.0;  // [0, 360), clockwise from the heading
  double pitch_deg = 0.0;    // [-90, 90], up positive

  std::array<double, 3> unit_vector() const {
    constexpr double rad = std::numbers::pi / 180.0;
    const double az = azimuth_deg * rad, el = pitch_deg * rad;
    return {std::sin(az) * std::cos(el), std::cos(az) * std::cos(el), std::sin(el)};
  }
};

struct DepthPixel {
  int row = 0;
  int col = 0;
};

/// Depthmap pixel whose center ray is nearest to the given direction.
inline DepthPixel nearest_depth_pixel(const DepthPlaneMap& map, const RayDirection& ray) {
  const double w = map.width, h = map.height;
  long col = static_cast<long>(std::floor(w / 2.0 + ray.azimuth_deg * w / 360.0 + 0.5));
  col %= map.width;
  if (col < 0) col += map.width;
  long row = static_cast<long>(std::floor(h / 2.0 - ray.pitch_deg * h / 180.0 + 0.5));
  row = std::clamp(row, 0L, static_cast<long>(map.height - 1));
  return {static_cast<int>(row), static_cast<int>(col)};
}

inline RayDirection depth_pixel_ray(const DepthPlaneMap& map, DepthPixel px) {
  double az = (px.col - map.width / 2.0) * 360.0 / map.width;
  if (az < 0) az += 360.0;
  return {az, (map.height / 2.0 - px.row) * 180.0 / map.height};
}

inline std::optional<double> plane_distance_along(const Plane& plane, const std::array<double, 3>& dir) {
  const double denom = double(plane.normal[0]) * dir[0] + double(plane.normal[1]) * dir[1] +
                       double(plane.normal[2]) * dir[2];
  if (denom <= kMinDenominator) return std::nullopt;
  return double(plane.distance) / denom;
}

/// Distance along `ray` to the surface indexed at the nearest depthmap
/// pixel. PlaneExact intersects that plane with the exact ray; NearestPixel
/// returns the depth stored for the pixel (its center ray). nullopt means
/// no surface.
inline std::optional<double> depth_at(const DepthPlaneMap& map, const RayDirection& ray,
                                      SamplingMode mode = SamplingMode::PlaneExact) {
  const auto px = nearest_depth_pixel(map, ray);
  const auto idx = map.index_at(px.row, px.col);
  if (idx == 0) return std::nullopt;
  const auto& plane = map.planes[idx];
  if (mode == SamplingMode::PlaneExact) return plane_distance_along(plane, ray.unit_vector());
  return plane_distance_along(plane, depth_pixel_ray(map, px).unit_vector());
}

/// Debug export: plane table, grid dimensions and per-plane pixel counts.
inline nlohmann::json depthmap_sidecar(const DepthPlaneMap& map) {
  std::vector<std::size_t> histogram(map.planes.size(), 0);
  for (auto idx : map.indices) ++histogram[idx];
  nlohmann::json planes = nlohmann::json::array();
  for (std::size_t i = 0; i < map.planes.size(); ++i) {
    const auto& p = map.planes[i];
    planes.push_back({{"index", i},
                      {"normal", {p.normal[0], p.normal[1], p.normal[2]}},
                      {"distance", p.distance},
                      {"pixels", histogram[i]}});
  }
  return {{"width", map.width}, {"height", map.height}, {"plane_count", map.planes.size()}, {"planes", planes}};
}

}  // namespace floorline
