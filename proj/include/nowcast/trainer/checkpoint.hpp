#pragma once

// .sckp checkpoint. Little-endian:
//   "SCKP" | version u8 = 1 | JSON header (u32 length + UTF-8) |
//   tensor count u32 | tensors | optimizer tensor count u32 | tensors | step u64
// where a tensor is: name (u32 length + UTF-8) | rank u8 | dims u32[rank] |
// f32 values. Optimizer tensors are named "m/<param>" and "v/<param>".

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nowcast/models.hpp"
#include "nowcast/trainer/nadam.hpp"

namespace nowcast::trainer {

template <typename T>
struct Checkpoint {
  models::ModelGraph<T> model;
  OptimState<T> state;
  // The full JSON header: {"model": ..., "optimizer": ..., "train": ...}.
  nlohmann::json header;
};

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const models::ModelGraph<T>& model,
                                            const OptimState<T>& state,
                                            const nlohmann::json& extra = nlohmann::json::object());

template <typename T>
Checkpoint<T> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

// Writes to a temporary sibling and renames it into place.
template <typename T>
void save_checkpoint(const models::ModelGraph<T>& model, const OptimState<T>& state,
                     const std::string& path, const nlohmann::json& extra = nlohmann::json::object());

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path);

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

// Copies stored tensors into `params`. Throws std::invalid_argument listing
// every name or shape difference (the first one leads the message).
template <typename T>
void load_parameters(const ParameterTable<T>& params, const std::vector<NamedTensor>& stored);

}  // namespace nowcast::trainer
