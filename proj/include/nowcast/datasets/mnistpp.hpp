#pragma once

// Moving MNIST++: digits bouncing inside a square patch while rotating,
// changing scale and changing brightness.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nowcast/datasets/sample.hpp"

namespace nowcast::datasets {

struct Glyph {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;
};

// Ten procedurally stroked 28x28 digits, 0-9.
std::vector<Glyph> builtin_glyphs();

// Images from an IDX3 (unsigned byte) file such as the MNIST image sets.
// max_count == 0 loads all of them.
std::vector<Glyph> load_idx_glyphs(const std::string& path, std::size_t max_count = 0);

struct MnistPpConfig {
  std::size_t patch = 64;
  std::size_t frames = 10;
  std::size_t digits_per_seq = 2;

  // Speed in px/frame, direction uniform in [0, 2pi).
  double velocity_min = 1.0;
  double velocity_max = 3.6;
  // Rotation rate uniform in [-rotation_max_deg, rotation_max_deg] per frame.
  double rotation_max_deg = 6.0;
  // Per-frame multiplicative scale drift; cumulative scale kept in range.
  double scale_rate_min = 0.98;
  double scale_rate_max = 1.02;
  double scale_min = 0.5;
  double scale_max = 1.5;
  // Per-frame multiplicative brightness drift, starting from 1.
  double illum_rate_min = 0.97;
  double illum_rate_max = 1.03;
  double illum_min = 0.6;
  double illum_max = 1.0;

  // Empty: built-in glyphs. Otherwise an IDX image file.
  std::string glyph_source;

  // Checks ranges and that the largest rotated, scaled glyph fits the patch.
  void validate(const std::vector<Glyph>& glyphs) const;

  // All motion and drift disabled; every frame equals the first.
  static MnistPpConfig frozen();
};

std::vector<Glyph> load_glyphs(const MnistPpConfig& cfg);

// Sample `index` of the stream identified by `seed`; independent of any
// other index.
SequenceSample generate_sequence(const MnistPpConfig& cfg, const std::vector<Glyph>& glyphs,
                                 std::uint64_t seed, std::uint64_t index);

Dataset gen_mnistpp(const MnistPpConfig& cfg, const std::vector<Glyph>& glyphs,
                    std::uint64_t seed, std::size_t count);
Dataset gen_mnistpp(const MnistPpConfig& cfg, std::uint64_t seed, std::size_t count);

// Per-frame axis-aligned box of one digit, recorded while generating.
struct DigitBox {
  double x0, y0, x1, y1;
};
// Same as generate_sequence but also returns every digit's box per frame
// (frame-major).
SequenceSample generate_sequence_traced(const MnistPpConfig& cfg, const std::vector<Glyph>& glyphs,
                                        std::uint64_t seed, std::uint64_t index,
                                        std::vector<DigitBox>& boxes);

}  // namespace nowcast::datasets
