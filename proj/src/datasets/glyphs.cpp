#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nowcast/datasets/mnistpp.hpp"
#include "nowcast/datasets/pnm.hpp"
#include "nowcast/detail/bytes.hpp"

namespace nowcast::datasets {

namespace {

struct Pt {
  double x, y;
};
using Stroke = std::vector<Pt>;

constexpr std::size_t kSize = 28;
constexpr double kPen = 2.6;  // stroke width in pixels

Stroke ellipse(double cx, double cy, double rx, double ry, double from_deg = 0, double to_deg = 360) {
  Stroke s;
  const int steps = 40;
  for (int i = 0; i <= steps; ++i) {
    const double a = (from_deg + (to_deg - from_deg) * i / steps) * std::numbers::pi / 180.0;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

// Strokes in unit coordinates, y pointing down.
std::vector<Stroke> digit_strokes(int d) {
  switch (d) {
    case 0: return {ellipse(0.5, 0.5, 0.32, 0.45)};
    case 1: return {{{0.32, 0.22}, {0.55, 0.05}, {0.55, 0.95}}};
    case 2: return {{{0.18, 0.28}, {0.3, 0.1}, {0.55, 0.05}, {0.78, 0.15}, {0.8, 0.38}, {0.2, 0.93}, {0.85, 0.93}}};
    case 3:
      return {{{0.2, 0.08}, {0.78, 0.08}, {0.45, 0.42}},
              ellipse(0.48, 0.68, 0.32, 0.26, -90, 150)};
    case 4: return {{{0.68, 0.95}, {0.68, 0.05}, {0.12, 0.66}, {0.88, 0.66}}};
    case 5:
      return {{{0.8, 0.06}, {0.28, 0.06}, {0.24, 0.42}},
              ellipse(0.5, 0.66, 0.3, 0.28, -150, 150)};
    case 6: return {{{0.72, 0.05}, {0.34, 0.38}, {0.22, 0.66}}, ellipse(0.5, 0.69, 0.28, 0.26)};
    case 7: return {{{0.14, 0.07}, {0.86, 0.07}, {0.42, 0.95}}};
    case 8: return {ellipse(0.5, 0.27, 0.22, 0.21), ellipse(0.5, 0.71, 0.28, 0.24)};
    case 9: return {ellipse(0.5, 0.3, 0.27, 0.25), {{0.77, 0.3}, {0.7, 0.62}, {0.42, 0.95}}};
    default: break;
  }
  throw std::out_of_range("digit_strokes: " + std::to_string(d));
}

double segment_distance(Pt p, Pt a, Pt b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double wx = p.x - a.x, wy = p.y - a.y;
  const double len2 = vx * vx + vy * vy;
  const double t = len2 > 0 ? std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0) : 0.0;
  const double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

Glyph render_digit(int d) {
  Glyph g;
  g.height = g.width = kSize;
  g.pixels.assign(kSize * kSize, 0);
  // Unit box mapped to a 20x20 area centered in the 28x28 cell, as in MNIST.
  const double box = 20.0, margin = 4.0;
  std::vector<std::pair<Pt, Pt>> segments;
  for (const auto& stroke : digit_strokes(d)) {
    for (std::size_t i = 0; i + 1 < stroke.size(); ++i) {
      segments.push_back({{margin + box * stroke[i].x, margin + box * stroke[i].y},
                          {margin + box * stroke[i + 1].x, margin + box * stroke[i + 1].y}});
    }
  }
  for (std::size_t r = 0; r < kSize; ++r) {
    for (std::size_t c = 0; c < kSize; ++c) {
      const Pt p{c + 0.5, r + 0.5};
      double dist = 1e9;
      for (const auto& [a, b] : segments) dist = std::min(dist, segment_distance(p, a, b));
      const double coverage = std::clamp(kPen / 2 + 0.5 - dist, 0.0, 1.0);
      g.pixels[r * kSize + c] = static_cast<std::uint8_t>(std::lround(255.0 * coverage));
    }
  }
  return g;
}

}  // namespace

std::vector<Glyph> builtin_glyphs() {
  std::vector<Glyph> out;
  for (int d = 0; d < 10; ++d) out.push_back(render_digit(d));
  return out;
}

std::vector<Glyph> load_idx_glyphs(const std::string& path, std::size_t max_count) {
  const auto bytes = read_file(path);
  // IDX headers are big-endian, unlike the rest of our formats.
  auto be32 = [&](std::size_t at) {
    if (bytes.size() < at + 4) throw FormatError("idx: truncated header", at);
    return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
           (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
  };
  if (be32(0) != 0x00000803u) throw FormatError("idx: expected a 3-d unsigned byte file", 0);
  std::size_t count = be32(4);
  const std::size_t rows = be32(8);
  const std::size_t cols = be32(12);
  if (rows == 0 || cols == 0) throw FormatError("idx: zero image extent", 8);
  if ((bytes.size() - 16) / (rows * cols) < count) throw FormatError("idx: truncated images", bytes.size());
  if (max_count > 0) count = std::min(count, max_count);
  std::vector<Glyph> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].height = rows;
    out[i].width = cols;
    const auto* p = bytes.data() + 16 + i * rows * cols;
    out[i].pixels.assign(p, p + rows * cols);
  }
  return out;
}

}  // namespace nowcast::datasets
