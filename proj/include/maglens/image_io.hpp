#pragma once

#include "maglens/render.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace maglens {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary P6 pixmap of the RGB channels: "P6 W H 255\n" + pixels.
std::vector<std::uint8_t> encode_ppm(const Framebuffer& fb);
Framebuffer decode_ppm(const std::vector<std::uint8_t>& bytes);

void write_ppm(const Framebuffer& fb, const std::string& path);
Framebuffer read_ppm(const std::string& path);
// RGBA PNG, default zlib settings.
void write_png(const Framebuffer& fb, const std::string& path);
Framebuffer read_png(const std::string& path);

// Picks PNG for a ".png" extension and PPM otherwise.
void write_image(const Framebuffer& fb, const std::string& path);
Framebuffer read_image(const std::string& path);

}  // namespace maglens
