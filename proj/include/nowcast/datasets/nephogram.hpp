#pragma once

// Satellite nephogram preprocessing: timestamped frames are grouped into
// gap-free runs, converted to gray, background-subtracted and cropped into
// fixed-length sequences.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nowcast/datasets/pnm.hpp"
#include "nowcast/datasets/sample.hpp"

namespace nowcast::datasets {

enum class BackgroundMode { per_pixel_min, per_pixel_median, external_file };

BackgroundMode parse_background_mode(const std::string& text);

struct NephoPipelineConfig {
  std::int64_t interval_minutes = 30;
  std::size_t seq_len = 7;  // inputs + target
  std::size_t crop = 200;
  std::size_t crops_per_window = 1;
  // Offset between consecutive windows of a run; 0 means seq_len (no overlap).
  std::size_t window_stride = 0;
  BackgroundMode background = BackgroundMode::per_pixel_min;
  std::string background_file;  // for external_file
  // Crops whose mean intensity over all frames is below this are dropped.
  double min_mean_intensity = 4.0;

  void validate() const;
};

// Minutes since 1970-01-01 00:00 for the first valid YYYYMMDDHHMM digit run
// in `name`, if any.
std::optional<std::int64_t> parse_timestamp(const std::string& name);

struct TimedFrame {
  std::int64_t minutes = 0;
  std::string label;  // file name
  Image image;        // gray or RGB
};

struct NephoResult {
  Dataset samples;
  // Labels of each gap-free run in time order.
  std::vector<std::vector<std::string>> runs;
  std::size_t windows = 0;
  std::size_t rejected_crops = 0;
  std::vector<std::string> warnings;
};

// Core of the pipeline on frames already in memory (any order).
NephoResult build_sequences(std::vector<TimedFrame> frames, const NephoPipelineConfig& cfg,
                            std::uint64_t seed, const Image* external_background = nullptr);

// Reads every .pgm/.ppm file in `src_dir`. Files without a parseable
// timestamp are skipped with a warning. Throws when no sequence survives.
NephoResult prep_nephograms(const std::string& src_dir, const NephoPipelineConfig& cfg,
                            std::uint64_t seed);

}  // namespace nowcast::datasets
