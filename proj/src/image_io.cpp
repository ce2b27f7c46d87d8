#include "maglens/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <string_view>

namespace maglens {

namespace {

bool has_png_extension(const std::string& path) {
  if (path.size() < 4) return false;
  std::string ext = path.substr(path.size() - 4);
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".png";
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw ImageError("cannot open '" + path + "'");
  return f;
}

}  // namespace

std::vector<std::uint8_t> encode_ppm(const Framebuffer& fb) {
  const std::string header = "P6 " + std::to_string(fb.width) + " " + std::to_string(fb.height) + " 255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 3 * fb.rgba.size() / 4);
  for (std::size_t i = 0; i < fb.rgba.size(); i += 4) {
    out.insert(out.end(), {fb.rgba[i], fb.rgba[i + 1], fb.rgba[i + 2]});
  }
  return out;
}

Framebuffer decode_ppm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    long v = 0;
    const std::size_t begin = pos;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && v < 1'000'000) v = v * 10 + (bytes[pos++] - '0');
    if (pos == begin) throw ImageError("malformed pixmap header");
    return static_cast<int>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw ImageError("not a P6 pixmap");
  pos = 2;
  const int w = read_int();
  const int h = read_int();
  const int maxval = read_int();
  if (w < 1 || h < 1 || maxval != 255) throw ImageError("unsupported pixmap dimensions or depth");
  ++pos;  // single whitespace before the raster
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() - std::min(pos, bytes.size()) != 3 * n) throw ImageError("pixmap raster size mismatch");
  Framebuffer fb(w, h);
  for (std::size_t i = 0; i < n; ++i) {
    fb.rgba[4 * i] = bytes[pos + 3 * i];
    fb.rgba[4 * i + 1] = bytes[pos + 3 * i + 1];
    fb.rgba[4 * i + 2] = bytes[pos + 3 * i + 2];
    fb.rgba[4 * i + 3] = 255;
  }
  return fb;
}

void write_ppm(const Framebuffer& fb, const std::string& path) {
  const auto bytes = encode_ppm(fb);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError("cannot write '" + path + "'");
}

Framebuffer read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_ppm(bytes);
  } catch (const ImageError& e) {
    throw ImageError(path + ": " + e.what());
  }
}

void write_png(const Framebuffer& fb, const std::string& path) {
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw ImageError("libpng initialization failed for '" + path + "'");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageError("cannot write '" + path + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, fb.width, fb.height, 8, PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < fb.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(fb.pixel(0, y)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Framebuffer read_png(const std::string& path) {
  auto file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageError("libpng initialization failed for '" + path + "'");
  }
  Framebuffer fb;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("cannot read PNG '" + path + "'");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_gray_to_rgb(png);
  png_set_add_alpha(png, 0xff, PNG_FILLER_AFTER);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  fb = Framebuffer(w, h);
  for (int y = 0; y < h; ++y) png_read_row(png, fb.pixel(0, y), nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return fb;
}

void write_image(const Framebuffer& fb, const std::string& path) {
  if (has_png_extension(path)) {
    write_png(fb, path);
  } else {
    write_ppm(fb, path);
  }
}

Framebuffer read_image(const std::string& path) {
  return has_png_extension(path) ? read_png(path) : read_ppm(path);
}

}  // namespace maglens
