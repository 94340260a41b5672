#pragma once

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "floorline/error.hpp"

namespace floorline::png {

struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 (gray / palette index) or 3 (RGB)
  std::vector<std::uint8_t> pixels;

  bool operator==(const Image&) const = default;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};

// Classic-API reader: keeps palette indices and 8-bit gray values as-is.
// Only plain C objects live across setjmp.
inline bool read_single_channel(std::FILE* fp, Image& out, std::string& err) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) { err = "png_create_read_struct failed"; return false; }
  png_infop info = png_create_info_struct(png);
  if (!info) { png_destroy_read_struct(&png, nullptr, nullptr); err = "png_create_info_struct failed"; return false; }
  png_bytep* rows = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    png_free(png, rows);
    png_destroy_read_struct(&png, &info, nullptr);
    err = "libpng decode error";
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth < 8) png_set_packing(png);
  if (depth == 16) png_set_strip_16(png);
  if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_PALETTE) {
    png_destroy_read_struct(&png, &info, nullptr);
    err = "label mask must be single-channel (gray or palette)";
    return false;
  }
  png_read_update_info(png, info);
  out.width = static_cast<int>(w);
  out.height = static_cast<int>(h);
  out.channels = 1;
  out.pixels.assign(std::size_t(w) * h, 0);
  rows = static_cast<png_bytep*>(png_malloc(png, sizeof(png_bytep) * h));
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = out.pixels.data() + std::size_t(y) * w;
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  png_free(png, rows);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline png_image make_image(const Image& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  return image;
}

}  // namespace detail

/// Reads gray or palette PNGs without colour conversion.
inline Image read_gray(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  Image img;
  std::string err;
  if (!detail::read_single_channel(fp.get(), img, err)) throw Error(ErrorCode::SchemaError, path.string() + ": " + err);
  return img;
}

inline Image read_rgb_memory(const std::string& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw Error(ErrorCode::SchemaError, std::string("png: ") + image.message);
  image.format = PNG_FORMAT_RGB;
  Image img;
  img.width = static_cast<int>(image.width);
  img.height = static_cast<int>(image.height);
  img.channels = 3;
  img.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::SchemaError, std::string("png: ") + image.message);
  }
  return img;
}

inline void write(const std::filesystem::path& path, const Image& img) {
  auto image = detail::make_image(img);
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels.data(), 0, nullptr))
    throw Error(ErrorCode::IoError, "cannot write " + path.string() + ": " + image.message);
}

inline std::string write_memory(const Image& img) {
  auto image = detail::make_image(img);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr))
    throw Error(ErrorCode::IoError, std::string("png encode: ") + image.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr))
    throw Error(ErrorCode::IoError, std::string("png encode: ") + image.message);
  out.resize(size);
  return out;
}

}  // namespace floorline::png
