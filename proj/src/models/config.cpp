#include "nowcast/model_config.hpp"

#include <stdexcept>
#include <type_traits>

#include "nowcast/error.hpp"

namespace nowcast::models {

using nlohmann::json;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::fclstm: return "fclstm";
    case ModelKind::clstm: return "clstm";
    case ModelKind::fc_lstm: return "fc_lstm";
    case ModelKind::mlp: return "mlp";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "fclstm" || text == "f-clstm") return ModelKind::fclstm;
  if (text == "clstm") return ModelKind::clstm;
  if (text == "fc_lstm" || text == "fc-lstm") return ModelKind::fc_lstm;
  if (text == "mlp") return ModelKind::mlp;
  throw std::invalid_argument("unknown model kind: " + std::string(text));
}

namespace {

void require_positive(std::size_t v, const char* what) {
  if (v == 0) throw std::invalid_argument(std::string(what) + " must be positive");
}

void check_divisible(std::size_t h, std::size_t w, std::size_t factor, const char* model) {
  if (h % factor != 0 || w % factor != 0) {
    throw ShapeError(std::string(model) + ": input " + std::to_string(h) + "x" + std::to_string(w) +
                     " is not divisible by " + std::to_string(factor));
  }
}

}  // namespace

void FclstmConfig::validate() const {
  require_positive(scales, "scales");
  require_positive(input_frames, "input_frames");
  require_positive(fusion_hidden, "fusion_hidden");
  require_positive(height, "height");
  require_positive(width, "width");
  if (channels.size() != 2 * scales) {
    throw std::invalid_argument("fclstm: expected " + std::to_string(2 * scales) +
                                " channel widths, got " + std::to_string(channels.size()));
  }
  for (auto c : channels) require_positive(c, "channel width");
  if (kernel % 2 == 0) throw std::invalid_argument("fclstm: kernel must be odd for same padding");
  check_divisible(height, width, std::size_t{1} << (scales - 1), "fclstm");
}

void ClstmConfig::validate() const {
  require_positive(input_frames, "input_frames");
  require_positive(height, "height");
  require_positive(width, "width");
  if (channels.empty()) throw std::invalid_argument("clstm: needs at least one layer");
  for (auto c : channels) require_positive(c, "channel width");
  if (kernel % 2 == 0) throw std::invalid_argument("clstm: kernel must be odd for same padding");
  check_divisible(height, width, std::size_t{1} << (channels.size() - 1), "clstm");
}

void FcLstmConfig::validate() const {
  require_positive(hidden, "hidden");
  require_positive(input_frames, "input_frames");
  require_positive(height, "height");
  require_positive(width, "width");
}

void MlpConfig::validate() const {
  require_positive(hidden, "hidden");
  require_positive(input_frames, "input_frames");
  require_positive(height, "height");
  require_positive(width, "width");
}

ModelKind kind_of(const ModelConfig& config) {
  return std::visit(
      [](const auto& c) {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, FclstmConfig>) return ModelKind::fclstm;
        if constexpr (std::is_same_v<C, ClstmConfig>) return ModelKind::clstm;
        if constexpr (std::is_same_v<C, FcLstmConfig>) return ModelKind::fc_lstm;
        if constexpr (std::is_same_v<C, MlpConfig>) return ModelKind::mlp;
      },
      config);
}

std::size_t input_frames_of(const ModelConfig& config) {
  return std::visit([](const auto& c) { return c.input_frames; }, config);
}
std::size_t height_of(const ModelConfig& config) {
  return std::visit([](const auto& c) { return c.height; }, config);
}
std::size_t width_of(const ModelConfig& config) {
  return std::visit([](const auto& c) { return c.width; }, config);
}
void validate(const ModelConfig& config) {
  std::visit([](const auto& c) { c.validate(); }, config);
}

json to_json(const ModelConfig& config) {
  json j;
  j["kind"] = to_string(kind_of(config));
  std::visit(
      [&](const auto& c) {
        using C = std::decay_t<decltype(c)>;
        j["height"] = c.height;
        j["width"] = c.width;
        j["input_frames"] = c.input_frames;
        if constexpr (std::is_same_v<C, FclstmConfig>) {
          j["scales"] = c.scales;
          j["channels"] = c.channels;
          j["kernel"] = c.kernel;
          j["fusion_hidden"] = c.fusion_hidden;
          j["peephole"] = c.peephole;
        } else if constexpr (std::is_same_v<C, ClstmConfig>) {
          j["channels"] = c.channels;
          j["kernel"] = c.kernel;
          j["peephole"] = c.peephole;
        } else {
          j["hidden"] = c.hidden;
        }
      },
      config);
  return j;
}

ModelConfig config_from_json(const json& j) {
  const auto kind = parse_model_kind(j.at("kind").get<std::string>());
  auto common = [&](auto& c) {
    c.height = j.at("height").get<std::size_t>();
    c.width = j.at("width").get<std::size_t>();
    c.input_frames = j.at("input_frames").get<std::size_t>();
  };
  switch (kind) {
    case ModelKind::fclstm: {
      FclstmConfig c;
      common(c);
      c.scales = j.at("scales").get<std::size_t>();
      c.channels = j.at("channels").get<std::vector<std::size_t>>();
      c.kernel = j.at("kernel").get<std::size_t>();
      c.fusion_hidden = j.at("fusion_hidden").get<std::size_t>();
      c.peephole = j.at("peephole").get<bool>();
      return c;
    }
    case ModelKind::clstm: {
      ClstmConfig c;
      common(c);
      c.channels = j.at("channels").get<std::vector<std::size_t>>();
      c.kernel = j.at("kernel").get<std::size_t>();
      c.peephole = j.at("peephole").get<bool>();
      return c;
    }
    case ModelKind::fc_lstm: {
      FcLstmConfig c;
      common(c);
      c.hidden = j.at("hidden").get<std::size_t>();
      return c;
    }
    case ModelKind::mlp: {
      MlpConfig c;
      common(c);
      c.hidden = j.at("hidden").get<std::size_t>();
      return c;
    }
  }
  throw std::invalid_argument("unreachable model kind");
}

}  // namespace nowcast::models
