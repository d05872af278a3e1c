#include "nowcast/models.hpp"

#include <string>

#include "nowcast/autodiff.hpp"
#include "nowcast/trainer/init.hpp"

namespace nowcast::models {

using nn::Mode;

namespace {

template <typename T>
nn::BatchNormParams<T> make_bn(ParameterTable<T>& table, const std::string& prefix, std::size_t c) {
  nn::BatchNormParams<T> bn;
  bn.gamma = table.add(prefix + ".gamma", {c}, ParamRole::bn_gamma);
  bn.beta = table.add(prefix + ".beta", {c}, ParamRole::bn_beta);
  bn.running_mean = table.add(prefix + ".running_mean", {c}, ParamRole::bn_running_mean);
  bn.running_var = table.add(prefix + ".running_var", {c}, ParamRole::bn_running_var);
  return bn;
}

// Same-padded stride-1 convolution. Biases are omitted when batch norm
// follows, since normalization cancels them.
template <typename T>
nn::Conv2dParams<T> make_conv(ParameterTable<T>& table, const std::string& prefix, std::size_t cin,
                              std::size_t cout, std::size_t k, bool with_bias) {
  nn::Conv2dParams<T> p;
  p.weight = table.add(prefix + ".weight", {cout, cin, k, k}, ParamRole::weight, cin * k * k);
  if (with_bias) p.bias = table.add(prefix + ".bias", {cout}, ParamRole::bias);
  p.padding = k / 2;
  return p;
}

// Transposed-convolution weights are laid out [cin, cout, k, k].
template <typename T>
nn::Conv2dParams<T> make_deconv(ParameterTable<T>& table, const std::string& prefix,
                                std::size_t cin, std::size_t cout, std::size_t k, bool with_bias) {
  nn::Conv2dParams<T> p;
  p.weight = table.add(prefix + ".weight", {cin, cout, k, k}, ParamRole::weight, cin * k * k);
  if (with_bias) p.bias = table.add(prefix + ".bias", {cout}, ParamRole::bias);
  p.padding = k / 2;
  return p;
}

template <typename T>
nn::ConvLstmParams<T> make_convlstm(ParameterTable<T>& table, const std::string& prefix,
                                    std::size_t cin, std::size_t hidden, std::size_t k,
                                    bool peephole, std::size_t h, std::size_t w) {
  const std::size_t fan_in = (cin + hidden) * k * k;
  nn::ConvLstmParams<T> p;
  p.w_x = table.add(prefix + ".w_x", {4 * hidden, cin, k, k}, ParamRole::weight, fan_in);
  p.w_h = table.add(prefix + ".w_h", {4 * hidden, hidden, k, k}, ParamRole::weight, fan_in);
  p.bias = table.add(prefix + ".bias", {4 * hidden}, ParamRole::bias);
  if (peephole) {
    p.peep_i = table.add(prefix + ".peep_i", {hidden, h, w}, ParamRole::peephole);
    p.peep_f = table.add(prefix + ".peep_f", {hidden, h, w}, ParamRole::peephole);
    p.peep_o = table.add(prefix + ".peep_o", {hidden, h, w}, ParamRole::peephole);
  }
  return p;
}

// Decoder from a hidden map with `widths.back()` channels at 1/2^(n-1)
// resolution back to one full-resolution channel, mirroring `widths`.
template <typename T>
Decoder<T> make_decoder(ParameterTable<T>& table, const std::string& prefix,
                        const std::vector<std::size_t>& widths, std::size_t k) {
  Decoder<T> d;
  std::size_t current = widths.back();
  for (std::size_t level = widths.size() - 1; level > 0; --level) {
    const std::string stage = prefix + ".stage" + std::to_string(d.stages.size());
    const std::size_t next = widths[level - 1];
    d.stages.push_back({make_deconv(table, stage + ".deconv", current, next, k, false),
                        make_bn(table, stage + ".bn", next)});
    current = next;
  }
  d.head = make_deconv(table, prefix + ".head", current, 1, k, true);
  return d;
}

template <typename T>
Tensor<T> run_decoder(const Decoder<T>& d, const Tensor<T>& hidden, Mode mode) {
  Tensor<T> x = hidden;
  for (const auto& stage : d.stages) {
    x = relu(nn::batchnorm2d(nn::conv_transpose2d(nn::upsample_nearest(x, 2), stage.conv), stage.bn, mode));
  }
  return nn::conv_transpose2d(x, d.head);
}

template <typename T>
Tensor<T> to_pixels(const Tensor<T>& normalized) {
  return scale(normalized, static_cast<T>(kPixelScale));
}

template <typename T>
Tensor<T> normalize_frames(const ModelConfig& config, const Tensor<T>& frames) {
  const Shape expected{input_frames_of(config), 1, height_of(config), width_of(config)};
  if (frames.shape() != expected) {
    throw ShapeError(to_string(kind_of(config)) + ": expected frames " + shape_str(expected) +
                     ", got " + shape_str(frames.shape()));
  }
  return scale(frames, static_cast<T>(1.0 / kPixelScale));
}

template <typename T>
Tensor<T> pool_sequence(const std::vector<Tensor<T>>& hidden) {
  return nn::maxpool2d(stack(hidden), 2).values;
}

template <typename T>
ModelGraph<T> build_clstm(const ClstmConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelGraph<T> m;
  m.config = cfg;
  ClstmNet<T> net;
  std::size_t cin = 1;
  for (std::size_t l = 0; l < cfg.channels.size(); ++l) {
    const std::size_t h = cfg.height >> l;
    const std::size_t w = cfg.width >> l;
    net.lstm.push_back(make_convlstm(m.params, "l" + std::to_string(l) + ".lstm", cin,
                                     cfg.channels[l], cfg.kernel, cfg.peephole, h, w));
    cin = cfg.channels[l];
  }
  net.decoder = make_decoder(m.params, "dec", cfg.channels, cfg.kernel);
  m.net = std::move(net);
  trainer::init_uniform(m.params, seed);
  return m;
}

template <typename T>
ModelGraph<T> build_fc_lstm(const FcLstmConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelGraph<T> m;
  m.config = cfg;
  const std::size_t pixels = cfg.height * cfg.width;
  const std::size_t fan_in = pixels + cfg.hidden;
  FcLstmNet<T> net;
  net.cell.w_x = m.params.add("lstm.w_x", {4 * cfg.hidden, pixels}, ParamRole::weight, fan_in);
  net.cell.w_h = m.params.add("lstm.w_h", {4 * cfg.hidden, cfg.hidden}, ParamRole::weight, fan_in);
  net.cell.bias = m.params.add("lstm.bias", {4 * cfg.hidden}, ParamRole::bias);
  net.head_weight = m.params.add("head.weight", {pixels, cfg.hidden}, ParamRole::weight, cfg.hidden);
  net.head_bias = m.params.add("head.bias", {pixels}, ParamRole::bias);
  m.net = std::move(net);
  trainer::init_uniform(m.params, seed);
  return m;
}

template <typename T>
ModelGraph<T> build_mlp(const MlpConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelGraph<T> m;
  m.config = cfg;
  const std::size_t pixels = cfg.height * cfg.width;
  const std::vector<std::size_t> widths{cfg.input_frames * pixels, cfg.hidden, cfg.hidden, pixels};
  MlpNet<T> net;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::string prefix = "fc" + std::to_string(l);
    net.weights.push_back(m.params.add(prefix + ".weight", {widths[l + 1], widths[l]},
                                       ParamRole::weight, widths[l]));
    net.biases.push_back(m.params.add(prefix + ".bias", {widths[l + 1]}, ParamRole::bias));
  }
  m.net = std::move(net);
  trainer::init_uniform(m.params, seed);
  return m;
}

template <typename T>
Tensor<T> forward_clstm(const ClstmNet<T>& net, const Tensor<T>& x, Mode mode) {
  Tensor<T> seq = x;
  std::vector<Tensor<T>> hidden;
  for (std::size_t l = 0; l < net.lstm.size(); ++l) {
    if (l > 0) seq = pool_sequence(hidden);
    hidden = nn::convlstm_sequence(seq, net.lstm[l]);
  }
  return run_decoder(net.decoder, hidden.back(), mode);
}

template <typename T>
Tensor<T> forward_fc_lstm(const FcLstmNet<T>& net, const Tensor<T>& x) {
  const std::size_t frames = x.dim(0);
  const std::size_t pixels = x.numel() / frames;
  auto state = nn::LstmState<T>::zeros(net.cell.w_h.dim(1));
  for (std::size_t t = 0; t < frames; ++t) {
    state = nn::lstm_cell(reshape(select(x, t), {pixels}), state, net.cell);
  }
  return nn::linear(state.h, net.head_weight, net.head_bias);
}

template <typename T>
Tensor<T> forward_mlp(const MlpNet<T>& net, const Tensor<T>& x) {
  Tensor<T> h = reshape(x, {x.numel()});
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    h = nn::linear(h, net.weights[l], net.biases[l]);
    if (l + 1 < net.weights.size()) h = relu(h);
  }
  return h;
}

}  // namespace

template <typename T>
ModelGraph<T> build_fclstm(const FclstmConfig& cfg, std::uint64_t init_seed) {
  cfg.validate();
  ModelGraph<T> m;
  m.config = cfg;
  FclstmNet<T> net;
  std::vector<std::size_t> hidden_widths;
  std::size_t cin = 1;
  for (std::size_t s = 0; s < cfg.scales; ++s) {
    const std::string prefix = "s" + std::to_string(s);
    const std::size_t conv_c = cfg.channels[2 * s];
    const std::size_t hid_c = cfg.channels[2 * s + 1];
    net.seq_conv.push_back({make_conv(m.params, prefix + ".seqconv", cin, conv_c, cfg.kernel, false),
                            make_bn(m.params, prefix + ".seqconv.bn", conv_c)});
    net.lstm.push_back(make_convlstm(m.params, prefix + ".lstm", conv_c, hid_c, cfg.kernel,
                                     cfg.peephole, cfg.height >> s, cfg.width >> s));
    hidden_widths.push_back(hid_c);
    net.decoders.push_back(make_decoder(m.params, prefix + ".dec", hidden_widths, cfg.kernel));
    cin = hid_c;
  }
  net.fuse_hidden = {make_conv(m.params, "fuse.hidden", cfg.scales, cfg.fusion_hidden, 1, false),
                     make_bn(m.params, "fuse.hidden.bn", cfg.fusion_hidden)};
  net.fuse_out = make_conv(m.params, "fuse.out", cfg.fusion_hidden, 1, 1, true);
  m.net = std::move(net);
  trainer::init_uniform(m.params, init_seed);
  return m;
}

template <typename T>
ModelGraph<T> build_baseline(ModelKind kind, std::size_t height, std::size_t width,
                             std::size_t input_frames, std::uint64_t init_seed) {
  switch (kind) {
    case ModelKind::clstm: {
      ClstmConfig c;
      c.height = height;
      c.width = width;
      c.input_frames = input_frames;
      return build_clstm<T>(c, init_seed);
    }
    case ModelKind::fc_lstm: {
      FcLstmConfig c;
      c.height = height;
      c.width = width;
      c.input_frames = input_frames;
      return build_fc_lstm<T>(c, init_seed);
    }
    case ModelKind::mlp: {
      MlpConfig c;
      c.height = height;
      c.width = width;
      c.input_frames = input_frames;
      return build_mlp<T>(c, init_seed);
    }
    case ModelKind::fclstm:
      break;
  }
  throw std::invalid_argument("build_baseline: not a baseline kind: " + to_string(kind));
}

template <typename T>
ModelGraph<T> build_model(const ModelConfig& config, std::uint64_t init_seed) {
  return std::visit(
      [&](const auto& c) -> ModelGraph<T> {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, FclstmConfig>) return build_fclstm<T>(c, init_seed);
        if constexpr (std::is_same_v<C, ClstmConfig>) return build_clstm<T>(c, init_seed);
        if constexpr (std::is_same_v<C, FcLstmConfig>) return build_fc_lstm<T>(c, init_seed);
        if constexpr (std::is_same_v<C, MlpConfig>) return build_mlp<T>(c, init_seed);
      },
      config);
}

template <typename T>
MultiScaleOutput<T> forward_fclstm(const ModelGraph<T>& model, const Tensor<T>& frames, Mode mode) {
  const auto* net = std::get_if<FclstmNet<T>>(&model.net);
  if (net == nullptr) throw std::invalid_argument("forward_fclstm: model is " + to_string(model.kind()));
  Tensor<T> seq = normalize_frames(model.config, frames);

  const std::size_t scales = net->lstm.size();
  std::vector<Tensor<T>> raw;
  MultiScaleOutput<T> out;
  for (std::size_t s = 0; s < scales; ++s) {
    const auto& block = net->seq_conv[s];
    const auto features = relu(nn::batchnorm2d(nn::conv2d(seq, block.conv), block.bn, mode));
    const auto hidden = nn::convlstm_sequence(features, net->lstm[s]);
    raw.push_back(run_decoder(net->decoders[s], hidden.back(), mode));
    out.per_scale.push_back(to_pixels(raw.back()));
    if (s + 1 < scales) seq = pool_sequence(hidden);
  }
  const auto mixed = relu(nn::batchnorm2d(nn::conv2d(concat(raw), net->fuse_hidden.conv),
                                          net->fuse_hidden.bn, mode));
  out.fused = to_pixels(nn::conv2d(mixed, net->fuse_out));
  return out;
}

template <typename T>
Tensor<T> forward_baseline(const ModelGraph<T>& model, const Tensor<T>& frames, Mode mode) {
  const auto x = normalize_frames(model.config, frames);
  const Shape out_shape{1, height_of(model.config), width_of(model.config)};
  return std::visit(
      [&](const auto& net) -> Tensor<T> {
        using N = std::decay_t<decltype(net)>;
        if constexpr (std::is_same_v<N, ClstmNet<T>>) {
          return to_pixels(forward_clstm(net, x, mode));
        } else if constexpr (std::is_same_v<N, FcLstmNet<T>>) {
          return to_pixels(reshape(forward_fc_lstm(net, x), out_shape));
        } else if constexpr (std::is_same_v<N, MlpNet<T>>) {
          return to_pixels(reshape(forward_mlp(net, x), out_shape));
        } else {
          throw std::invalid_argument("forward_baseline: model is fclstm");
        }
      },
      model.net);
}

template <typename T>
Tensor<T> predict(const ModelGraph<T>& model, const Tensor<T>& frames, Mode mode) {
  if (model.kind() == ModelKind::fclstm) return forward_fclstm(model, frames, mode).fused;
  return forward_baseline(model, frames, mode);
}

template <typename T>
std::size_t param_count(const ModelGraph<T>& model) {
  std::size_t n = 0;
  for (const auto& e : model.params.entries()) {
    if (e.trainable()) n += e.tensor.numel();
  }
  return n;
}

#define NOWCAST_INSTANTIATE(T)                                                                   \
  template ModelGraph<T> build_fclstm<T>(const FclstmConfig&, std::uint64_t);                    \
  template ModelGraph<T> build_baseline<T>(ModelKind, std::size_t, std::size_t, std::size_t,     \
                                           std::uint64_t);                                       \
  template ModelGraph<T> build_model<T>(const ModelConfig&, std::uint64_t);                      \
  template MultiScaleOutput<T> forward_fclstm(const ModelGraph<T>&, const Tensor<T>&, Mode);     \
  template Tensor<T> forward_baseline(const ModelGraph<T>&, const Tensor<T>&, Mode);             \
  template Tensor<T> predict(const ModelGraph<T>&, const Tensor<T>&, Mode);                      \
  template std::size_t param_count(const ModelGraph<T>&);

NOWCAST_INSTANTIATE(float)
NOWCAST_INSTANTIATE(double)

}  // namespace nowcast::models
