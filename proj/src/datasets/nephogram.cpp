#include "nowcast/datasets/nephogram.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <stdexcept>

#include "nowcast/error.hpp"
#include "nowcast/rng.hpp"

namespace nowcast::datasets {

namespace fs = std::filesystem;

BackgroundMode parse_background_mode(const std::string& text) {
  if (text == "min") return BackgroundMode::per_pixel_min;
  if (text == "median") return BackgroundMode::per_pixel_median;
  if (text == "file") return BackgroundMode::external_file;
  throw std::invalid_argument("unknown background mode: " + text + " (expected min, median or file)");
}

void NephoPipelineConfig::validate() const {
  if (interval_minutes <= 0) throw std::invalid_argument("nephogram: interval must be positive");
  if (seq_len < 2) throw std::invalid_argument("nephogram: seq_len must be at least 2");
  if (crop == 0) throw std::invalid_argument("nephogram: crop must be positive");
  if (crops_per_window == 0) throw std::invalid_argument("nephogram: crops_per_window must be positive");
  if (background == BackgroundMode::external_file && background_file.empty()) {
    throw std::invalid_argument("nephogram: external background needs a file");
  }
}

namespace {

// Days since 1970-01-01 in the proleptic Gregorian calendar.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

std::optional<std::int64_t> decode_digits(const std::string& s) {
  auto num = [&](std::size_t at, std::size_t len) { return std::stoll(s.substr(at, len)); };
  const auto y = num(0, 4);
  const auto mo = num(4, 2), d = num(6, 2), h = num(8, 2), mi = num(10, 2);
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (mo < 1 || mo > 12 || d < 1 || h > 23 || mi > 59) return std::nullopt;
  const int month_days = kDays[mo - 1] + (mo == 2 && leap(y) ? 1 : 0);
  if (d > month_days) return std::nullopt;
  return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 1440 + h * 60 + mi;
}

Image background_image(const std::vector<TimedFrame>& frames, const NephoPipelineConfig& cfg,
                       const Image* external) {
  const auto& first = frames.front().image;
  if (cfg.background == BackgroundMode::external_file) {
    if (external == nullptr) throw std::invalid_argument("nephogram: external background not loaded");
    Image bg = to_gray(*external);
    if (bg.width != first.width || bg.height != first.height) {
      throw ShapeError("nephogram: background is " + std::to_string(bg.width) + "x" +
                       std::to_string(bg.height) + ", frames are " + std::to_string(first.width) +
                       "x" + std::to_string(first.height));
    }
    return bg;
  }
  Image bg = first;
  const std::size_t n = first.pixels.size();
  if (cfg.background == BackgroundMode::per_pixel_min) {
    for (const auto& f : frames) {
      for (std::size_t i = 0; i < n; ++i) bg.pixels[i] = std::min(bg.pixels[i], f.image.pixels[i]);
    }
    return bg;
  }
  // Lower median, so the result is always an observed value.
  std::vector<std::uint8_t> column(frames.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < frames.size(); ++k) column[k] = frames[k].image.pixels[i];
    const auto mid = column.begin() + static_cast<std::ptrdiff_t>((column.size() - 1) / 2);
    std::nth_element(column.begin(), mid, column.end());
    bg.pixels[i] = *mid;
  }
  return bg;
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(const std::string& name) {
  std::size_t i = 0;
  while (i < name.size()) {
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < name.size() && std::isdigit(static_cast<unsigned char>(name[j]))) ++j;
    if (j - i == 12) {
      if (auto t = decode_digits(name.substr(i, 12))) return t;
    }
    i = j;
  }
  return std::nullopt;
}

NephoResult build_sequences(std::vector<TimedFrame> frames, const NephoPipelineConfig& cfg,
                            std::uint64_t seed, const Image* external_background) {
  cfg.validate();
  NephoResult result;
  if (frames.empty()) throw std::invalid_argument("nephogram: no frames");
  std::stable_sort(frames.begin(), frames.end(),
                   [](const TimedFrame& a, const TimedFrame& b) { return a.minutes < b.minutes; });
  for (auto& f : frames) f.image = to_gray(f.image);
  const std::size_t width = frames.front().image.width;
  const std::size_t height = frames.front().image.height;
  for (const auto& f : frames) {
    if (f.image.width != width || f.image.height != height) {
      throw ShapeError("nephogram: " + f.label + " is " + std::to_string(f.image.width) + "x" +
                       std::to_string(f.image.height) + ", expected " + std::to_string(width) +
                       "x" + std::to_string(height));
    }
  }
  if (cfg.crop > width || cfg.crop > height) {
    throw ShapeError("nephogram: crop " + std::to_string(cfg.crop) + " exceeds frame extent " +
                     std::to_string(width) + "x" + std::to_string(height));
  }

  const Image bg = background_image(frames, cfg, external_background);
  for (auto& f : frames) {
    for (std::size_t i = 0; i < f.image.pixels.size(); ++i) {
      f.image.pixels[i] = f.image.pixels[i] > bg.pixels[i] ? f.image.pixels[i] - bg.pixels[i] : 0;
    }
  }

  // Runs: maximal stretches where each step is exactly one interval.
  std::vector<std::pair<std::size_t, std::size_t>> runs;  // [begin, end)
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= frames.size(); ++i) {
    if (i == frames.size() || frames[i].minutes - frames[i - 1].minutes != cfg.interval_minutes) {
      runs.emplace_back(begin, i);
      std::vector<std::string> labels;
      for (std::size_t k = begin; k < i; ++k) labels.push_back(frames[k].label);
      result.runs.push_back(std::move(labels));
      begin = i;
    }
  }

  const std::size_t stride = cfg.window_stride == 0 ? cfg.seq_len : cfg.window_stride;
  const std::size_t area = cfg.crop * cfg.crop;
  std::uint64_t window_index = 0;
  for (const auto& [rb, re] : runs) {
    for (std::size_t w = rb; w + cfg.seq_len <= re; w += stride, ++window_index) {
      ++result.windows;
      // Offsets depend only on (seed, window), never on which crops survive.
      Rng rng(derive_seed(seed, window_index));
      for (std::size_t c = 0; c < cfg.crops_per_window; ++c) {
        const std::size_t oy = rng.below(height - cfg.crop + 1);
        const std::size_t ox = rng.below(width - cfg.crop + 1);
        SequenceSample s(cfg.seq_len, cfg.crop, cfg.crop);
        double total = 0;
        for (std::size_t t = 0; t < cfg.seq_len; ++t) {
          const auto& img = frames[w + t].image;
          auto* out = s.frame(t);
          for (std::size_t r = 0; r < cfg.crop; ++r) {
            const auto* row = img.pixels.data() + (oy + r) * width + ox;
            std::copy(row, row + cfg.crop, out + r * cfg.crop);
            for (std::size_t k = 0; k < cfg.crop; ++k) total += row[k];
          }
          s.timestamps.push_back(frames[w + t].label);
        }
        if (total / static_cast<double>(area * cfg.seq_len) < cfg.min_mean_intensity) {
          ++result.rejected_crops;
          continue;
        }
        s.source = frames[w].label + "@" + std::to_string(ox) + "," + std::to_string(oy);
        result.samples.push_back(std::move(s));
      }
    }
  }
  Rng order(seed);
  order.shuffle(result.samples.begin(), result.samples.end());
  return result;
}

NephoResult prep_nephograms(const std::string& src_dir, const NephoPipelineConfig& cfg,
                            std::uint64_t seed) {
  cfg.validate();
  if (!fs::is_directory(src_dir)) throw std::invalid_argument("not a directory: " + src_dir);
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(src_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());

  std::vector<std::string> warnings;
  std::vector<TimedFrame> frames;
  for (const auto& p : paths) {
    const auto name = p.filename().string();
    const auto t = parse_timestamp(name);
    if (!t) {
      warnings.push_back("skipping " + name + ": no YYYYMMDDHHMM timestamp in the name");
      continue;
    }
    frames.push_back({*t, name, read_pnm(p.string())});
  }
  if (frames.empty()) throw std::runtime_error("nephogram: no timestamped frames in " + src_dir);

  std::optional<Image> bg;
  if (cfg.background == BackgroundMode::external_file) bg = read_pnm(cfg.background_file);
  auto result = build_sequences(std::move(frames), cfg, seed, bg ? &*bg : nullptr);
  result.warnings.insert(result.warnings.begin(), warnings.begin(), warnings.end());
  if (result.samples.empty()) {
    throw std::runtime_error("nephogram: no sequences survived (" + std::to_string(result.windows) +
                             " windows, " + std::to_string(result.rejected_crops) +
                             " crops below the content threshold)");
  }
  return result;
}

}  // namespace nowcast::datasets
