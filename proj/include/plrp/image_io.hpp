#pragma once

#include "plrp/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace plrp::image {

/// 8-bit raster, row-major with interleaved channels (1 = gray, 3 = RGB).
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }
  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c = 0) {
    return pixels[(y * width + x) * channels + c];
  }

  bool operator==(const Image&) const = default;
};

/// Reads an 8-bit PNG (gray or color; alpha is dropped) or a binary/ASCII
/// PGM/PPM with maxval 255.
Image read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Image& img);
void write_png(const std::filesystem::path& path, const Image& img);
/// PGM for one channel, PPM for three.
void write_pnm(const std::filesystem::path& path, const Image& img);
/// Chooses the encoder from the extension: .pgm/.ppm -> PNM, anything else PNG.
void write_image(const std::filesystem::path& path, const Image& img);

/// [C,H,W] tensor with values v / 255.
Tensor to_tensor(const Image& img);
/// Inverse of to_tensor: clamps to [0,1] and rounds to the nearest level.
/// The tensor must be [C,H,W] with C in {1, 3}.
Image from_tensor(const Tensor& t);

} // namespace plrp::image
