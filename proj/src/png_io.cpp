#include "sili/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace sili::png_io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Decodes any 8/16-bit PNG into packed 8-bit RGB rows.
std::vector<uint8_t> read_rgb8(const std::string& path, int& height, int& width) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw std::runtime_error("png: cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png: allocation failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png: allocation failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png: failed to decode " + path);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);

  png_set_expand(png);            // palette/gray bit depths -> 8-bit
  png_set_strip_16(png);          // 16-bit -> 8-bit
  png_set_strip_alpha(png);       // drop alpha
  png_set_gray_to_rgb(png);       // gray -> rgb
  png_read_update_info(png, info);

  height = static_cast<int>(png_get_image_height(png, info));
  width = static_cast<int>(png_get_image_width(png, info));
  const size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<size_t>(width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png: unexpected channel layout in " + path);
  }
  std::vector<uint8_t> data(static_cast<size_t>(height) * rowbytes);
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  for (int y = 0; y < height; ++y) rows[static_cast<size_t>(y)] = data.data() + static_cast<size_t>(y) * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return data;
}

void write_rgb8(const std::string& path, const std::vector<uint8_t>& data, int height, int width,
                int channels) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("png: cannot create " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png: allocation failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png: allocation failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png: failed to encode " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  for (int y = 0; y < height; ++y)
    rows[static_cast<size_t>(y)] =
        const_cast<png_bytep>(data.data() + static_cast<size_t>(y) * width * channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageTensor read_image(const std::string& path) {
  int h = 0, w = 0;
  std::vector<uint8_t> data = read_rgb8(path, h, w);
  ImageTensor img(h, w, 3);
  for (size_t i = 0; i < data.size(); ++i) img.values[i] = data[i] / 255.0;
  return img;
}

Mask read_mask(const std::string& path) {
  int h = 0, w = 0;
  std::vector<uint8_t> data = read_rgb8(path, h, w);
  Mask mask(h, w);
  for (int64_t i = 0; i < static_cast<int64_t>(mask.values.size()); ++i)
    mask.values[static_cast<size_t>(i)] = data[static_cast<size_t>(i) * 3] >= 128 ? 1 : 0;
  return mask;
}

void write_image(const std::string& path, const ImageTensor& img) {
  detail::require(img.channels == 3, "write_image: expects RGB");
  std::vector<uint8_t> data(img.values.size());
  for (size_t i = 0; i < data.size(); ++i) {
    const double v = std::clamp(img.values[i], 0.0, 1.0);
    data[i] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
  write_rgb8(path, data, img.height, img.width, 3);
}

void write_mask(const std::string& path, const Mask& mask) {
  std::vector<uint8_t> data(mask.values.size());
  for (size_t i = 0; i < data.size(); ++i) data[i] = mask.values[i] ? 255 : 0;
  write_rgb8(path, data, mask.height, mask.width, 1);
}

}  // namespace sili::png_io
