#pragma once

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nowcast/datasets/mnistpp.hpp"
#include "nowcast/model_config.hpp"
#include "nowcast/rng.hpp"
#include "nowcast/tensor.hpp"

namespace testing_support {

template <typename T = double>
nowcast::Tensor<T> random_tensor(nowcast::Shape shape, std::uint64_t seed, double lo = -1.0,
                                 double hi = 1.0) {
  nowcast::Rng rng(seed);
  std::vector<T> v(nowcast::shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return nowcast::Tensor<T>(std::move(shape), std::move(v));
}

inline std::vector<double> to_vector(const nowcast::Tensor<double>& t) {
  return {t.data().begin(), t.data().end()};
}

// Two-scale F-CLSTM small enough for finite differences.
inline nowcast::models::FclstmConfig tiny_fclstm(std::size_t size = 16, std::size_t frames = 3) {
  nowcast::models::FclstmConfig c;
  c.scales = 2;
  c.channels = {2, 2, 4, 4};
  c.fusion_hidden = 3;
  c.height = c.width = size;
  c.input_frames = frames;
  return c;
}

inline nowcast::models::ClstmConfig tiny_clstm(std::size_t size = 16, std::size_t frames = 3) {
  nowcast::models::ClstmConfig c;
  c.channels = {2, 4};
  c.height = c.width = size;
  c.input_frames = frames;
  return c;
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline TempDir::TempDir(const std::string& tag) {
  static int counter = 0;
  path_ = std::filesystem::temp_directory_path() /
          ("nowcast_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

inline TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

// Single-digit Moving MNIST++ on a small patch, glyphs downsampled to 10x10.
inline nowcast::datasets::Dataset small_mnist(std::size_t count, std::size_t size, std::size_t frames,
                                              std::uint64_t seed) {
  nowcast::datasets::MnistPpConfig cfg;
  cfg.patch = size;
  cfg.frames = frames;
  cfg.digits_per_seq = 1;
  cfg.scale_max = 1.0;
  cfg.scale_rate_max = 1.0;
  cfg.scale_min = 0.5;
  auto glyphs = nowcast::datasets::builtin_glyphs();
  for (auto& g : glyphs) {
    nowcast::datasets::Glyph small{10, 10, std::vector<std::uint8_t>(100)};
    for (std::size_t r = 0; r < 10; ++r)
      for (std::size_t c = 0; c < 10; ++c) small.pixels[r * 10 + c] = g.pixels[(r * 28 / 10) * 28 + c * 28 / 10];
    g = small;
  }
  return nowcast::datasets::gen_mnistpp(cfg, glyphs, seed, count);
}

}  // namespace testing_support
