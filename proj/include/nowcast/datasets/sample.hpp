#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast::datasets {

// One sequence of 8-bit grayscale frames. The first frames-1 are the model
// inputs, the last one is the target.
struct SequenceSample {
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // frame-major, row-major; frames*height*width

  std::string source;                   // optional, not serialized
  std::vector<std::string> timestamps;  // optional, not serialized

  SequenceSample() = default;
  SequenceSample(std::size_t frames, std::size_t height, std::size_t width);

  std::size_t frame_size() const { return height * width; }
  std::uint8_t* frame(std::size_t t) { return pixels.data() + t * frame_size(); }
  const std::uint8_t* frame(std::size_t t) const { return pixels.data() + t * frame_size(); }

  // The `count` frames preceding the target as [count,1,H,W]. count == 0
  // means all of them.
  template <typename T>
  Tensor<T> inputs(std::size_t count = 0) const;
  // The last frame as [1,H,W].
  template <typename T>
  Tensor<T> target() const;

  bool operator==(const SequenceSample& other) const {
    return frames == other.frames && height == other.height && width == other.width &&
           pixels == other.pixels;
  }
};

using Dataset = std::vector<SequenceSample>;

// Throws ShapeError unless every sample has the same frames/height/width.
void require_homogeneous(const Dataset& samples, const char* what);

}  // namespace nowcast::datasets
