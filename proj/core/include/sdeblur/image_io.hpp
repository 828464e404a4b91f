#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sdeblur/blur_model.hpp"
#include "sdeblur/image.hpp"

namespace sdeblur {

/// Reads an 8- or 16-bit grayscale or RGB PNG into [0, 1]. Alpha is dropped,
/// palette images are expanded.
ImageBuffer read_png(const std::filesystem::path& path);

/// Writes a 1- or 3-channel image, clamping to [0, 1] and rounding to the
/// nearest code value.
void write_png(const std::filesystem::path& path, const ImageBuffer& image,
               int bit_depth = 16);

/// Raw binary PGM (P5) contents.
struct GrayImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> values;
};

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

/// Single-channel image as PGM scaled to `maxval`.
void write_pgm(const std::filesystem::path& path, const ImageBuffer& image,
               int maxval = 255);

/// PNG or PGM, chosen by file extension.
void write_image(const std::filesystem::path& path, const ImageBuffer& image,
                 int bit_depth = 16);

/// Little-endian float flow planes in PFM layout: header "PF4", "W H",
/// "-1.0", then rows bottom to top with 4 floats per pixel (forward x, y,
/// backward x, y).
FlowField read_flow_pfm(const std::filesystem::path& path);
void write_flow_pfm(const std::filesystem::path& path, const FlowField& flow);

}  // namespace sdeblur
