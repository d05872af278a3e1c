#include "nowcast/trainer/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "nowcast/datasets/pnm.hpp"
#include "nowcast/detail/bytes.hpp"

namespace nowcast::trainer {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'K', 'P'};
constexpr std::uint8_t kVersion = 1;

template <typename T>
void put_tensor(detail::ByteWriter& w, const std::string& name, const Shape& shape, const T* data) {
  if (shape.size() > 255) throw std::invalid_argument("checkpoint: rank too large for " + name);
  w.str(name);
  w.u8(static_cast<std::uint8_t>(shape.size()));
  for (auto d : shape) w.u32(static_cast<std::uint32_t>(d));
  const std::size_t n = shape_numel(shape);
  for (std::size_t i = 0; i < n; ++i) w.f32(static_cast<float>(data[i]));
}

NamedTensor get_tensor(detail::ByteReader& r) {
  NamedTensor t;
  t.name = r.str("tensor name");
  const std::size_t rank = r.u8("tensor rank");
  std::size_t n = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t at = r.offset();
    t.shape.push_back(r.u32("tensor dims"));
    if (t.shape.back() == 0) r.fail("zero extent in " + t.name, at);
    n *= t.shape.back();
    if (n > r.remaining()) r.fail("tensor " + t.name + " larger than the file", at);
  }
  r.need(4 * n, "tensor values");
  t.values.resize(n);
  for (auto& v : t.values) v = r.f32("tensor values");
  return t;
}

std::vector<NamedTensor> get_tensors(detail::ByteReader& r) {
  const std::size_t count = r.u32("tensor count");
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(get_tensor(r));
  return out;
}

}  // namespace

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const models::ModelGraph<T>& model,
                                            const OptimState<T>& state, const nlohmann::json& extra) {
  nlohmann::json header = extra;
  header["model"] = models::to_json(model.config);
  header["optimizer"] = {{"lr", state.hp.lr}, {"beta1", state.hp.beta1}, {"beta2", state.hp.beta2},
                         {"eps", state.hp.eps}};
  detail::ByteWriter w;
  w.raw(kMagic, 4);
  w.u8(kVersion);
  w.str(header.dump());
  const auto& entries = model.params.entries();
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) put_tensor(w, e.name, e.tensor.shape(), e.tensor.data().data());
  w.u32(static_cast<std::uint32_t>(2 * state.names.size()));
  for (std::size_t k = 0; k < state.names.size(); ++k) {
    const Shape shape{state.m[k].size()};
    put_tensor(w, "m/" + state.names[k], shape, state.m[k].data());
    put_tensor(w, "v/" + state.names[k], shape, state.v[k].data());
  }
  w.u64(state.step);
  return std::move(w.bytes());
}

template <typename T>
void load_parameters(const ParameterTable<T>& params, const std::vector<NamedTensor>& stored) {
  std::vector<std::string> problems;
  const auto& entries = params.entries();
  const std::size_t common = std::min(entries.size(), stored.size());
  for (std::size_t i = 0; i < common; ++i) {
    const auto& e = entries[i];
    const auto& s = stored[i];
    if (e.name != s.name) {
      problems.push_back("tensor " + std::to_string(i) + ": expected " + e.name + ", file has " + s.name);
    } else if (e.tensor.shape() != s.shape) {
      problems.push_back(e.name + ": expected shape " + shape_str(e.tensor.shape()) + ", file has " +
                         shape_str(s.shape));
    }
  }
  for (std::size_t i = common; i < entries.size(); ++i) problems.push_back("missing " + entries[i].name);
  for (std::size_t i = common; i < stored.size(); ++i) problems.push_back("unexpected " + stored[i].name);
  if (!problems.empty()) {
    std::string msg = "checkpoint does not match the model: ";
    for (std::size_t i = 0; i < problems.size(); ++i) msg += (i ? "; " : "") + problems[i];
    throw std::invalid_argument(msg);
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto dst = entries[i].tensor.mutable_data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<T>(stored[i].values[k]);
  }
}

template <typename T>
Checkpoint<T> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes.data(), bytes.size(), "sckp");
  const auto* magic = r.raw(4, "magic");
  for (int i = 0; i < 4; ++i) {
    if (magic[i] != static_cast<std::uint8_t>(kMagic[i])) r.fail("bad magic", 0);
  }
  const std::size_t version_at = r.offset();
  const auto version = r.u8("version");
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version), version_at);
  const std::size_t header_at = r.offset();
  Checkpoint<T> ck;
  try {
    ck.header = nlohmann::json::parse(r.str("header"));
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("header is not valid JSON: ") + e.what(), header_at);
  }
  models::ModelConfig config;
  NadamConfig hp;
  try {
    config = models::config_from_json(ck.header.at("model"));
    const auto& o = ck.header.at("optimizer");
    hp.lr = o.at("lr").template get<double>();
    hp.beta1 = o.at("beta1").template get<double>();
    hp.beta2 = o.at("beta2").template get<double>();
    hp.eps = o.at("eps").template get<double>();
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("bad header: ") + e.what(), header_at);
  }
  const auto params = get_tensors(r);
  const auto moments = get_tensors(r);
  const auto step = r.u64("step counter");
  if (r.remaining() != 0) r.fail("trailing bytes", r.offset());

  ck.model = models::build_model<T>(config, 0);
  load_parameters(ck.model.params, params);
  ck.state = OptimState<T>::zeros(ck.model.params, hp);
  ck.state.step = step;
  if (moments.size() != 2 * ck.state.names.size()) {
    throw std::invalid_argument("checkpoint: expected " + std::to_string(2 * ck.state.names.size()) +
                                " optimizer tensors, file has " + std::to_string(moments.size()));
  }
  for (std::size_t k = 0; k < ck.state.names.size(); ++k) {
    const auto& m = moments[2 * k];
    const auto& v = moments[2 * k + 1];
    const auto& name = ck.state.names[k];
    if (m.name != "m/" + name || v.name != "v/" + name || m.values.size() != ck.state.m[k].size() ||
        v.values.size() != ck.state.v[k].size()) {
      throw std::invalid_argument("checkpoint: optimizer state does not match parameter " + name);
    }
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      ck.state.m[k][i] = static_cast<T>(m.values[i]);
      ck.state.v[k][i] = static_cast<T>(v.values[i]);
    }
  }
  return ck;
}

template <typename T>
void save_checkpoint(const models::ModelGraph<T>& model, const OptimState<T>& state,
                     const std::string& path, const nlohmann::json& extra) {
  const std::string tmp = path + ".tmp";
  datasets::write_file(tmp, encode_checkpoint(model, state, extra));
  std::filesystem::rename(tmp, path);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  return decode_checkpoint<T>(datasets::read_file(path));
}

#define NOWCAST_INSTANTIATE(T)                                                                       \
  template std::vector<std::uint8_t> encode_checkpoint(const models::ModelGraph<T>&,                 \
                                                       const OptimState<T>&, const nlohmann::json&); \
  template Checkpoint<T> decode_checkpoint<T>(const std::vector<std::uint8_t>&);                     \
  template void save_checkpoint(const models::ModelGraph<T>&, const OptimState<T>&,                  \
                                const std::string&, const nlohmann::json&);                          \
  template Checkpoint<T> load_checkpoint<T>(const std::string&);                                     \
  template void load_parameters(const ParameterTable<T>&, const std::vector<NamedTensor>&);

NOWCAST_INSTANTIATE(float)
NOWCAST_INSTANTIATE(double)

}  // namespace nowcast::trainer
