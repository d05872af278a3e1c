#include "nowcast/datasets/sample.hpp"

#include <string>

#include "nowcast/error.hpp"

namespace nowcast::datasets {

SequenceSample::SequenceSample(std::size_t f, std::size_t h, std::size_t w)
    : frames(f), height(h), width(w), pixels(f * h * w, 0) {}

template <typename T>
Tensor<T> SequenceSample::inputs(std::size_t count) const {
  if (frames < 2) throw ShapeError("sample has no input frames");
  const std::size_t available = frames - 1;
  if (count == 0) count = available;
  if (count > available) {
    throw ShapeError("requested " + std::to_string(count) + " input frames, sample has " +
                     std::to_string(available));
  }
  const std::size_t first = available - count;
  std::vector<T> values(count * frame_size());
  const auto* src = frame(first);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<T>(src[i]);
  return Tensor<T>({count, 1, height, width}, std::move(values));
}

template <typename T>
Tensor<T> SequenceSample::target() const {
  if (frames == 0) throw ShapeError("empty sample");
  std::vector<T> values(frame_size());
  const auto* src = frame(frames - 1);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<T>(src[i]);
  return Tensor<T>({1, height, width}, std::move(values));
}

void require_homogeneous(const Dataset& samples, const char* what) {
  if (samples.empty()) return;
  const auto& a = samples.front();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& b = samples[i];
    if (b.frames != a.frames || b.height != a.height || b.width != a.width) {
      throw ShapeError(std::string(what) + ": sample " + std::to_string(i) + " is " +
                       std::to_string(b.frames) + "x" + std::to_string(b.height) + "x" +
                       std::to_string(b.width) + ", expected " + std::to_string(a.frames) + "x" +
                       std::to_string(a.height) + "x" + std::to_string(a.width));
    }
    if (b.pixels.size() != b.frames * b.height * b.width) {
      throw ShapeError(std::string(what) + ": sample " + std::to_string(i) + " pixel count mismatch");
    }
  }
}

template Tensor<float> SequenceSample::inputs<float>(std::size_t) const;
template Tensor<double> SequenceSample::inputs<double>(std::size_t) const;
template Tensor<float> SequenceSample::target<float>() const;
template Tensor<double> SequenceSample::target<double>() const;

}  // namespace nowcast::datasets
