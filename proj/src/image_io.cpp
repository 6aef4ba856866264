#include "witness_guard/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

namespace wg {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

std::uint8_t to_byte(float v) {
  const float clamped = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return f;
}

Tensor read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("failed to decode PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int channels = png_get_channels(png, info);
  std::vector<png_byte> pixels(static_cast<std::size_t>(width) * height * channels);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * channels;
  }
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor out({static_cast<std::size_t>(channels), height, width});
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        out(c, y, x) = pixels[(y * width + x) * channels + c] / 255.0f;
      }
    }
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Tensor& image) {
  const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed to encode PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(width * channels);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) row[x * channels + c] = to_byte(image(c, y, x));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::size_t read_pnm_int(std::istream& in) {
  in >> std::ws;
  while (in.peek() == '#') {
    std::string comment;
    std::getline(in, comment);
    in >> std::ws;
  }
  std::size_t v = 0;
  if (!(in >> v)) throw std::runtime_error("malformed PNM header");
  return v;
}

Tensor read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  std::size_t channels = 0;
  if (magic == "P5") channels = 1;
  else if (magic == "P6") channels = 3;
  else throw std::runtime_error(path.string() + ": only binary P5/P6 PNM is supported");
  const std::size_t width = read_pnm_int(in);
  const std::size_t height = read_pnm_int(in);
  const std::size_t maxval = read_pnm_int(in);
  if (maxval == 0 || maxval > 255) throw std::runtime_error(path.string() + ": maxval must be 1..255");
  in.get();  // single whitespace before raster
  std::vector<unsigned char> raster(width * height * channels);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!in) throw std::runtime_error(path.string() + ": truncated raster");
  Tensor out({channels, height, width});
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        out(c, y, x) = static_cast<float>(raster[(y * width + x) * channels + c]) /
                       static_cast<float>(maxval);
      }
    }
  }
  return out;
}

void write_pnm(const std::filesystem::path& path, const Tensor& image) {
  const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << (channels == 1 ? "P5" : "P6") << '\n' << width << ' ' << height << "\n255\n";
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) out.put(static_cast<char>(to_byte(image(c, y, x))));
    }
  }
}

void check_writable(const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw InvalidArgument("write_image: need a 1- or 3-channel CxHxW tensor, got " +
                          shape_to_string(image.shape()));
  }
}

}  // namespace

Tensor read_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
  throw InvalidArgument("unsupported image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const Tensor& image) {
  check_writable(image);
  const std::string ext = lower_extension(path);
  if (ext == ".png") return write_png(path, image);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    if ((ext == ".pgm") != (image.dim(0) == 1) && ext != ".pnm") {
      throw InvalidArgument(path.string() + ": channel count does not match extension");
    }
    return write_pnm(path, image);
  }
  throw InvalidArgument("unsupported image format: " + path.string());
}

Tensor quantize_8bit(const Tensor& image) {
  Tensor out = image;
  for (float& v : out.data()) v = static_cast<float>(to_byte(v)) / 255.0f;
  return out;
}

Tensor convert_channels(const Tensor& image, std::size_t channels) {
  if (image.rank() != 3) throw InvalidArgument("convert_channels: need a CxHxW tensor");
  const std::size_t have = image.dim(0);
  if (have == channels) return image;
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (have == 1 && channels == 3) {
    Tensor out({3, h, w});
    const Tensor plane = image.channel(0);
    for (std::size_t c = 0; c < 3; ++c) out.set_channel(c, plane);
    return out;
  }
  if (have == 3 && channels == 1) {
    Tensor out({1, h, w});
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        out(0, y, x) = 0.299f * image(0, y, x) + 0.587f * image(1, y, x) +
                       0.114f * image(2, y, x);
      }
    }
    return out;
  }
  throw InvalidArgument("convert_channels: cannot map " + std::to_string(have) +
                        " channels to " + std::to_string(channels));
}

}  // namespace wg
