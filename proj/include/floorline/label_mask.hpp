#pragma once

// Label masks: one category code per panorama pixel.
//
//   0 other, 1 door, 2 road, 3 grass, 4 dirt
//
// On disk a mask is a single-channel 8-bit PNG holding those codes plus a
// JSON sidecar listing the door instances as half-open bounding boxes
// [x0, x1) x [y0, y1). The pixels of an instance are the door-labelled
// pixels inside its box.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "floorline/error.hpp"
#include "floorline/png_io.hpp"
#include "json.hpp"

namespace floorline {

enum class Label : std::uint8_t { Other = 0, Door = 1, Road = 2, Grass = 3, Dirt = 4 };
inline constexpr std::uint8_t kMaxLabelCode = 4;

inline const char* label_name(Label l) {
  switch (l) {
    case Label::Other: return "other";
    case Label::Door: return "door";
    case Label::Road: return "road";
    case Label::Grass: return "grass";
    case Label::Dirt: return "dirt";
  }
  return "other";
}

struct Pixel {
  int x = 0;
  int y = 0;
  bool operator==(const Pixel&) const = default;
};

struct DoorInstance {
  int id = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open box

  int box_width() const { return x1 - x0; }
  int box_height() const { return y1 - y0; }
  bool operator==(const DoorInstance&) const = default;
};

struct LabelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;
  std::vector<DoorInstance> doors;

  LabelMask() = default;
  LabelMask(int w, int h, Label fill = Label::Other)
      : width(w), height(h), labels(std::size_t(w) * std::size_t(h), static_cast<std::uint8_t>(fill)) {}

  Label at(int x, int y) const { return static_cast<Label>(labels[std::size_t(y) * std::size_t(width) + std::size_t(x)]); }
  void set(int x, int y, Label l) { labels[std::size_t(y) * std::size_t(width) + std::size_t(x)] = static_cast<std::uint8_t>(l); }

  void fill_rect(int x0, int y0, int x1, int y1, Label l) {
    for (int y = std::max(0, y0); y < std::min(height, y1); ++y)
      for (int x = std::max(0, x0); x < std::min(width, x1); ++x) set(x, y, l);
  }

  bool operator==(const LabelMask&) const = default;
};

inline std::vector<Pixel> instance_pixels(const LabelMask& mask, const DoorInstance& door) {
  std::vector<Pixel> out;
  for (int y = door.y0; y < door.y1; ++y)
    for (int x = door.x0; x < door.x1; ++x)
      if (mask.at(x, y) == Label::Door) out.push_back({x, y});
  return out;
}

/// Throws SchemaError unless codes, dimensions and door boxes are sane.
inline void validate(const LabelMask& mask) {
  if (mask.width <= 0 || mask.height <= 0 || mask.labels.size() != std::size_t(mask.width) * std::size_t(mask.height))
    throw Error(ErrorCode::SchemaError, "mask dimensions do not match label grid");
  for (auto c : mask.labels)
    if (c > kMaxLabelCode) throw Error(ErrorCode::SchemaError, "unknown label code " + std::to_string(c));
  for (const auto& d : mask.doors) {
    if (d.x0 < 0 || d.y0 < 0 || d.x1 > mask.width || d.y1 > mask.height || d.x0 >= d.x1 || d.y0 >= d.y1)
      throw Error(ErrorCode::SchemaError, "door instance " + std::to_string(d.id) + " box out of bounds");
    bool any = false;
    for (int y = d.y0; y < d.y1 && !any; ++y)
      for (int x = d.x0; x < d.x1 && !any; ++x) any = mask.at(x, y) == Label::Door;
    if (!any) throw Error(ErrorCode::SchemaError, "door instance " + std::to_string(d.id) + " holds no door pixels");
  }
}

/// 4-connected components of door pixels, ordered by first pixel in
/// raster order. Components do not wrap across the panorama seam.
inline std::vector<DoorInstance> door_components(const LabelMask& mask) {
  std::vector<DoorInstance> out;
  std::vector<std::uint8_t> seen(mask.labels.size(), 0);
  std::vector<Pixel> stack;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const auto i = std::size_t(y) * mask.width + x;
      if (seen[i] || mask.labels[i] != static_cast<std::uint8_t>(Label::Door)) continue;
      DoorInstance d{static_cast<int>(out.size()), x, y, x + 1, y + 1};
      stack.push_back({x, y});
      seen[i] = 1;
      while (!stack.empty()) {
        const auto p = stack.back();
        stack.pop_back();
        d.x0 = std::min(d.x0, p.x);
        d.x1 = std::max(d.x1, p.x + 1);
        d.y0 = std::min(d.y0, p.y);
        d.y1 = std::max(d.y1, p.y + 1);
        const Pixel nbrs[4] = {{p.x - 1, p.y}, {p.x + 1, p.y}, {p.x, p.y - 1}, {p.x, p.y + 1}};
        for (const auto& q : nbrs) {
          if (q.x < 0 || q.y < 0 || q.x >= mask.width || q.y >= mask.height) continue;
          const auto j = std::size_t(q.y) * mask.width + q.x;
          if (seen[j] || mask.labels[j] != static_cast<std::uint8_t>(Label::Door)) continue;
          seen[j] = 1;
          stack.push_back(q);
        }
      }
      out.push_back(d);
    }
  }
  return out;
}

inline nlohmann::json mask_sidecar(const LabelMask& mask) {
  nlohmann::json doors = nlohmann::json::array();
  for (const auto& d : mask.doors) doors.push_back({{"id", d.id}, {"x0", d.x0}, {"y0", d.y0}, {"x1", d.x1}, {"y1", d.y1}});
  return {{"width", mask.width},
          {"height", mask.height},
          {"codes", {{"other", 0}, {"door", 1}, {"road", 2}, {"grass", 3}, {"dirt", 4}}},
          {"doors", doors}};
}

inline void save_mask(const LabelMask& mask, const std::filesystem::path& png_path,
                      const std::filesystem::path& sidecar_path) {
  validate(mask);
  png::write(png_path, {mask.width, mask.height, 1, mask.labels});
  std::ofstream(sidecar_path) << mask_sidecar(mask).dump(2) << '\n';
}

/// Loads and validates a mask. Without a sidecar the door instances are
/// recovered as connected components.
inline LabelMask load_mask(const std::filesystem::path& png_path, const std::filesystem::path& sidecar_path) {
  auto img = png::read_gray(png_path);
  LabelMask mask;
  mask.width = img.width;
  mask.height = img.height;
  mask.labels = std::move(img.pixels);
  if (std::filesystem::exists(sidecar_path)) {
    nlohmann::json j;
    try {
      std::ifstream(sidecar_path) >> j;
      if (j.at("width").get<int>() != mask.width || j.at("height").get<int>() != mask.height)
        throw Error(ErrorCode::SchemaError, "sidecar dimensions differ from the PNG");
      for (const auto& d : j.at("doors"))
        mask.doors.push_back({d.at("id").get<int>(), d.at("x0").get<int>(), d.at("y0").get<int>(),
                              d.at("x1").get<int>(), d.at("y1").get<int>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaError, sidecar_path.string() + ": " + e.what());
    }
  } else {
    mask.doors = door_components(mask);
  }
  validate(mask);
  return mask;
}

}  // namespace floorline
