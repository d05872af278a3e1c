#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace nowcast::models {

enum class ModelKind { fclstm, clstm, fc_lstm, mlp };

std::string to_string(ModelKind kind);
// Accepts "fclstm", "clstm", "fc_lstm" (or "fc-lstm") and "mlp".
ModelKind parse_model_kind(std::string_view text);

// Hierarchical model: `scales` SeqConv-ConvLSTM blocks, pooled between
// scales, each with its own decoder head, fused by 1x1 convolutions.
struct FclstmConfig {
  std::size_t scales = 3;
  // Pairs per scale: seq-conv width, then ConvLSTM hidden width.
  std::vector<std::size_t> channels{32, 32, 64, 64, 128, 128};
  std::size_t kernel = 3;
  std::size_t fusion_hidden = 16;
  bool peephole = false;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t input_frames = 9;

  void validate() const;
};

// Stacked ConvLSTM auto-encoder baseline: one hidden width per layer with
// 2x2 pooling between layers.
struct ClstmConfig {
  std::vector<std::size_t> channels{16, 32, 64};
  std::size_t kernel = 3;
  bool peephole = false;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t input_frames = 9;

  void validate() const;
};

struct FcLstmConfig {
  std::size_t hidden = 256;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t input_frames = 9;

  void validate() const;
};

struct MlpConfig {
  std::size_t hidden = 256;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t input_frames = 9;

  void validate() const;
};

using ModelConfig = std::variant<FclstmConfig, ClstmConfig, FcLstmConfig, MlpConfig>;

ModelKind kind_of(const ModelConfig& config);
std::size_t input_frames_of(const ModelConfig& config);
std::size_t height_of(const ModelConfig& config);
std::size_t width_of(const ModelConfig& config);
void validate(const ModelConfig& config);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

}  // namespace nowcast::models
