#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace nowcast::datasets {

// 8-bit raster, interleaved channels (1 = gray, 3 = RGB).
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;
};

// Binary P5 (gray) or P6 (RGB) with maxval 255; '#' comments allowed in the
// header. Throws FormatError on malformed input.
Image decode_pnm(const std::vector<std::uint8_t>& bytes);
Image read_pnm(const std::string& path);

std::vector<std::uint8_t> encode_pgm(const Image& gray);
void write_pgm(const Image& gray, const std::string& path);
void write_ppm(const Image& rgb, const std::string& path);

// Luma 0.299 R + 0.587 G + 0.114 B, rounded to nearest. Gray input is
// returned unchanged.
Image to_gray(const Image& image);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace nowcast::datasets
