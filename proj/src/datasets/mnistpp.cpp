#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nowcast/datasets/mnistpp.hpp"
#include "nowcast/parallel.hpp"
#include "nowcast/rng.hpp"

namespace nowcast::datasets {

namespace {

struct Digit {
  const Glyph* glyph;
  double cx, cy, vx, vy;
  double angle, rotation_rate;
  double scale, scale_rate;
  double illum, illum_rate;

  // Half extents of the rotated, scaled glyph square.
  double half_x() const {
    return 0.5 * scale * (glyph->width * std::abs(std::cos(angle)) + glyph->height * std::abs(std::sin(angle)));
  }
  double half_y() const {
    return 0.5 * scale * (glyph->width * std::abs(std::sin(angle)) + glyph->height * std::abs(std::cos(angle)));
  }
};

void require_range(double lo, double hi, const char* what) {
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo <= hi)) {
    throw std::invalid_argument(std::string("mnistpp: bad ") + what + " range");
  }
}

// Reflects the centre off the walls [half, extent - half].
void bounce(double& c, double& v, double half, double extent) {
  if (c - half < 0) {
    c = 2 * half - c;
    v = std::abs(v);
  }
  if (c + half > extent) {
    c = 2 * (extent - half) - c;
    v = -std::abs(v);
  }
  c = std::clamp(c, half, extent - half);
}

double bilinear(const Glyph& g, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
  const double ax = x - fx, ay = y - fy;
  auto at = [&](long r, long c) -> double {
    if (r < 0 || c < 0 || r >= static_cast<long>(g.height) || c >= static_cast<long>(g.width)) return 0.0;
    return g.pixels[static_cast<std::size_t>(r) * g.width + static_cast<std::size_t>(c)];
  };
  return (1 - ay) * ((1 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
         ay * ((1 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1));
}

void render(const Digit& d, std::vector<double>& canvas, std::size_t patch) {
  const double hx = d.half_x(), hy = d.half_y();
  const auto r0 = static_cast<std::size_t>(std::max(0.0, std::floor(d.cy - hy)));
  const auto r1 = static_cast<std::size_t>(std::min<double>(patch, std::ceil(d.cy + hy)));
  const auto c0 = static_cast<std::size_t>(std::max(0.0, std::floor(d.cx - hx)));
  const auto c1 = static_cast<std::size_t>(std::min<double>(patch, std::ceil(d.cx + hx)));
  const double cs = std::cos(d.angle), sn = std::sin(d.angle);
  const double gx = 0.5 * d.glyph->width, gy = 0.5 * d.glyph->height;
  for (std::size_t r = r0; r < r1; ++r) {
    for (std::size_t c = c0; c < c1; ++c) {
      const double dx = c + 0.5 - d.cx, dy = r + 0.5 - d.cy;
      const double u = (cs * dx + sn * dy) / d.scale + gx;
      const double v = (-sn * dx + cs * dy) / d.scale + gy;
      const double value = d.illum * bilinear(*d.glyph, u - 0.5, v - 0.5);
      auto& px = canvas[r * patch + c];
      px = std::max(px, value);
    }
  }
}

}  // namespace

void MnistPpConfig::validate(const std::vector<Glyph>& glyphs) const {
  if (patch == 0 || frames == 0 || digits_per_seq == 0) {
    throw std::invalid_argument("mnistpp: patch, frames and digits_per_seq must be positive");
  }
  if (glyphs.empty()) throw std::invalid_argument("mnistpp: glyph source is empty");
  require_range(velocity_min, velocity_max, "velocity");
  if (velocity_min < 0) throw std::invalid_argument("mnistpp: negative velocity");
  if (!(rotation_max_deg >= 0)) throw std::invalid_argument("mnistpp: negative rotation rate bound");
  require_range(scale_rate_min, scale_rate_max, "scale drift");
  require_range(scale_min, scale_max, "scale");
  require_range(illum_rate_min, illum_rate_max, "illumination drift");
  require_range(illum_min, illum_max, "illumination");
  if (scale_rate_min <= 0 || scale_min <= 0 || illum_rate_min <= 0 || illum_min < 0) {
    throw std::invalid_argument("mnistpp: scale and illumination factors must be positive");
  }
  if (scale_min > 1 || scale_max < 1 || illum_min > 1 || illum_max < 1) {
    throw std::invalid_argument("mnistpp: scale and illumination ranges must contain 1");
  }
  if (illum_max > 1) throw std::invalid_argument("mnistpp: illumination above 1 would saturate");
  // The rotated square's box is widest at 45 degrees: side * sqrt(2).
  double widest = 0;
  for (const auto& g : glyphs) {
    if (g.width == 0 || g.height == 0 || g.pixels.size() != g.width * g.height) {
      throw std::invalid_argument("mnistpp: malformed glyph");
    }
    widest = std::max(widest, std::hypot(double(g.width), double(g.height)));
  }
  if (scale_max * widest > static_cast<double>(patch)) {
    throw std::invalid_argument("mnistpp: glyph extent " + std::to_string(scale_max * widest) +
                                " px at maximum scale does not fit the " + std::to_string(patch) +
                                " px patch");
  }
}

MnistPpConfig MnistPpConfig::frozen() {
  MnistPpConfig c;
  c.velocity_min = c.velocity_max = 0;
  c.rotation_max_deg = 0;
  c.scale_rate_min = c.scale_rate_max = 1;
  c.illum_rate_min = c.illum_rate_max = 1;
  return c;
}

std::vector<Glyph> load_glyphs(const MnistPpConfig& cfg) {
  if (cfg.glyph_source.empty()) return builtin_glyphs();
  return load_idx_glyphs(cfg.glyph_source);
}

SequenceSample generate_sequence_traced(const MnistPpConfig& cfg, const std::vector<Glyph>& glyphs,
                                        std::uint64_t seed, std::uint64_t index,
                                        std::vector<DigitBox>& boxes) {
  cfg.validate(glyphs);
  Rng rng(derive_seed(seed, index));
  const double patch = static_cast<double>(cfg.patch);
  const double max_rot = cfg.rotation_max_deg * std::numbers::pi / 180.0;

  std::vector<Digit> digits(cfg.digits_per_seq);
  for (auto& d : digits) {
    d.glyph = &glyphs[rng.below(glyphs.size())];
    const double direction = rng.uniform(0, 2 * std::numbers::pi);
    const double speed = rng.uniform(cfg.velocity_min, cfg.velocity_max);
    d.vx = speed * std::cos(direction);
    d.vy = speed * std::sin(direction);
    d.angle = 0;
    d.rotation_rate = rng.uniform(-max_rot, max_rot);
    d.scale = 1;
    d.scale_rate = rng.uniform(cfg.scale_rate_min, cfg.scale_rate_max);
    d.illum = 1;
    d.illum_rate = rng.uniform(cfg.illum_rate_min, cfg.illum_rate_max);
    d.cx = rng.uniform(d.half_x(), patch - d.half_x());
    d.cy = rng.uniform(d.half_y(), patch - d.half_y());
  }

  SequenceSample s(cfg.frames, cfg.patch, cfg.patch);
  boxes.clear();
  std::vector<double> canvas(cfg.patch * cfg.patch);
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    std::fill(canvas.begin(), canvas.end(), 0.0);
    for (auto& d : digits) {
      if (t > 0) {
        d.angle += d.rotation_rate;
        d.scale = std::clamp(d.scale * d.scale_rate, cfg.scale_min, cfg.scale_max);
        d.illum = std::clamp(d.illum * d.illum_rate, cfg.illum_min, cfg.illum_max);
        d.cx += d.vx;
        d.cy += d.vy;
        bounce(d.cx, d.vx, d.half_x(), patch);
        bounce(d.cy, d.vy, d.half_y(), patch);
      }
      boxes.push_back({d.cx - d.half_x(), d.cy - d.half_y(), d.cx + d.half_x(), d.cy + d.half_y()});
      render(d, canvas, cfg.patch);
    }
    auto* out = s.frame(t);
    for (std::size_t i = 0; i < canvas.size(); ++i) {
      out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(canvas[i], 0.0, 255.0)));
    }
  }
  s.source = "mnistpp:" + std::to_string(seed) + ":" + std::to_string(index);
  return s;
}

SequenceSample generate_sequence(const MnistPpConfig& cfg, const std::vector<Glyph>& glyphs,
                                 std::uint64_t seed, std::uint64_t index) {
  std::vector<DigitBox> boxes;
  return generate_sequence_traced(cfg, glyphs, seed, index, boxes);
}

Dataset gen_mnistpp(const MnistPpConfig& cfg, const std::vector<Glyph>& glyphs, std::uint64_t seed,
                    std::size_t count) {
  cfg.validate(glyphs);
  Dataset out(count);
  parallel_for(count, [&](std::size_t i) { out[i] = generate_sequence(cfg, glyphs, seed, i); });
  return out;
}

Dataset gen_mnistpp(const MnistPpConfig& cfg, std::uint64_t seed, std::size_t count) {
  return gen_mnistpp(cfg, load_glyphs(cfg), seed, count);
}

}  // namespace nowcast::datasets
