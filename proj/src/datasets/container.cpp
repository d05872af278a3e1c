#include "nowcast/datasets/container.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nowcast/datasets/pnm.hpp"
#include "nowcast/detail/bytes.hpp"
#include "nowcast/rng.hpp"

namespace nowcast::datasets {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'S', 'Q'};
constexpr std::uint8_t kVersion = 1;

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > UINT32_MAX) throw std::invalid_argument(std::string("container: ") + what + " too large");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_container(const Dataset& samples) {
  require_homogeneous(samples, "write_container");
  const std::size_t frames = samples.empty() ? 0 : samples.front().frames;
  const std::size_t height = samples.empty() ? 0 : samples.front().height;
  const std::size_t width = samples.empty() ? 0 : samples.front().width;
  detail::ByteWriter w;
  w.bytes().reserve(kContainerHeaderBytes + samples.size() * frames * height * width);
  w.raw(kMagic, 4);
  w.u8(kVersion);
  w.u32(checked_u32(samples.size(), "sequence count"));
  w.u32(checked_u32(frames, "frame count"));
  w.u32(checked_u32(height, "height"));
  w.u32(checked_u32(width, "width"));
  w.u32(1);
  for (const auto& s : samples) w.raw(s.pixels.data(), s.pixels.size());
  return std::move(w.bytes());
}

Dataset decode_container(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes.data(), bytes.size(), "scsq");
  const auto* magic = r.raw(4, "magic");
  for (int i = 0; i < 4; ++i) {
    if (magic[i] != static_cast<std::uint8_t>(kMagic[i])) r.fail("bad magic", 0);
  }
  const std::size_t version_at = r.offset();
  const auto version = r.u8("version");
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version), version_at);
  const std::size_t count = r.u32("sequence count");
  const std::size_t frames = r.u32("frame count");
  const std::size_t height = r.u32("height");
  const std::size_t width = r.u32("width");
  const std::size_t channels_at = r.offset();
  const auto channels = r.u32("channels");
  if (channels != 1) r.fail("unsupported channel count " + std::to_string(channels), channels_at);
  if (count > 0 && (frames == 0 || height == 0 || width == 0)) {
    r.fail("zero extent with nonzero sequence count", 9);
  }
  const std::size_t per = frames * height * width;
  if (count > 0 && r.remaining() / count < per) {
    r.fail("truncated payload: need " + std::to_string(count * per) + " bytes, have " +
               std::to_string(r.remaining()),
           bytes.size());
  }
  Dataset out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SequenceSample s;
    s.frames = frames;
    s.height = height;
    s.width = width;
    const auto* p = r.raw(per, "payload");
    s.pixels.assign(p, p + per);
    out.push_back(std::move(s));
  }
  if (r.remaining() != 0) r.fail("trailing bytes after payload", r.offset());
  return out;
}

void write_container(const Dataset& samples, const std::string& path) {
  write_file(path, encode_container(samples));
}

Dataset read_container(const std::string& path) { return decode_container(read_file(path)); }

Split split(const Dataset& samples, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw std::invalid_argument("split: train fraction must be in (0, 1)");
  }
  const std::size_t n = samples.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw std::invalid_argument("split: " + std::to_string(n) + " samples at fraction " +
                                std::to_string(train_fraction) + " leaves one side empty");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  Split out;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? out.train : out.test).push_back(samples[order[i]]);
  }
  return out;
}

}  // namespace nowcast::datasets
