#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <set>

#include "nowcast/datasets/container.hpp"
#include "nowcast/datasets/mnistpp.hpp"
#include "nowcast/datasets/nephogram.hpp"
#include "nowcast/datasets/pnm.hpp"
#include "nowcast/error.hpp"
#include "nowcast/rng.hpp"
#include "support/helpers.hpp"

using namespace nowcast;
using namespace nowcast::datasets;
using testing_support::TempDir;

namespace {

Dataset random_dataset(std::size_t n, std::size_t frames, std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d(n, SequenceSample(frames, h, w));
  for (auto& s : d)
    for (auto& p : s.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return d;
}

Image gray(std::size_t w, std::size_t h, std::uint8_t v) { return Image{w, h, 1, std::vector<std::uint8_t>(w * h, v)}; }

Image noisy(std::size_t w, std::size_t h, std::uint64_t seed, int lo = 20, int hi = 200) {
  Rng rng(seed);
  Image img = gray(w, h, 0);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(lo + static_cast<int>(rng.below(hi - lo + 1)));
  return img;
}

// Minutes since the epoch of 2019-06-01 00:00 plus an offset.
constexpr std::int64_t kBase = 25989120;

std::string stamp_name(std::int64_t minutes) {
  const std::int64_t off = minutes - kBase;
  char buf[64];
  std::snprintf(buf, sizeof buf, "FY2F_201906%02lld%02lld%02lld.pgm", static_cast<long long>(1 + off / 1440),
                static_cast<long long>((off % 1440) / 60), static_cast<long long>(off % 60));
  return buf;
}

std::vector<TimedFrame> series(const std::vector<std::int64_t>& offsets, std::uint64_t seed = 1) {
  std::vector<TimedFrame> out;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const std::int64_t m = kBase + offsets[i];
    out.push_back({m, stamp_name(m), noisy(12, 10, seed + i)});
  }
  return out;
}

NephoPipelineConfig small_cfg() {
  NephoPipelineConfig c;
  c.crop = 8;
  c.min_mean_intensity = 0;
  return c;
}

std::vector<std::int64_t> every30(std::size_t n, std::int64_t start = 0) {
  std::vector<std::int64_t> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(start + 30 * static_cast<std::int64_t>(i));
  return v;
}

}  // namespace

TEST(Sample, InputsAndTargetViews) {
  SequenceSample s(4, 2, 3);
  for (std::size_t i = 0; i < s.pixels.size(); ++i) s.pixels[i] = static_cast<std::uint8_t>(i);
  const auto all = s.inputs<double>();
  EXPECT_EQ(all.shape(), (Shape{3, 1, 2, 3}));
  const auto last2 = s.inputs<double>(2);
  EXPECT_EQ(last2.shape(), (Shape{2, 1, 2, 3}));
  EXPECT_EQ(last2.at(0), 6.0);
  const auto y = s.target<float>();
  EXPECT_EQ(y.shape(), (Shape{1, 2, 3}));
  EXPECT_EQ(y.at(5), 23.0f);
  EXPECT_THROW(s.inputs<double>(4), std::invalid_argument);
  Dataset mixed{SequenceSample(4, 2, 3), SequenceSample(4, 3, 2)};
  EXPECT_THROW(require_homogeneous(mixed, "test"), ShapeError);
}

TEST(Glyphs, BuiltinDigitsAreDistinctAndInked) {
  const auto g = builtin_glyphs();
  ASSERT_EQ(g.size(), 10u);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(g[i].height, 28u);
    EXPECT_EQ(g[i].width, 28u);
    EXPECT_GT(*std::max_element(g[i].pixels.begin(), g[i].pixels.end()), 200);
    for (std::size_t j = 0; j < i; ++j) EXPECT_NE(g[i].pixels, g[j].pixels);
  }
}

TEST(Glyphs, LoadsIdxFiles) {
  TempDir dir("idx");
  std::vector<std::uint8_t> bytes{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 2};
  for (int i = 0; i < 12; ++i) bytes.push_back(static_cast<std::uint8_t>(i * 20));
  write_file(dir.file("g.idx"), bytes);
  const auto g = load_idx_glyphs(dir.file("g.idx"));
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[1].height, 3u);
  EXPECT_EQ(g[1].width, 2u);
  EXPECT_EQ(g[1].pixels[0], 120);
  EXPECT_EQ(load_idx_glyphs(dir.file("g.idx"), 1).size(), 1u);
  bytes[3] = 1;
  write_file(dir.file("bad.idx"), bytes);
  EXPECT_THROW(load_idx_glyphs(dir.file("bad.idx")), FormatError);
  bytes[3] = 3;
  bytes.pop_back();
  write_file(dir.file("short.idx"), bytes);
  EXPECT_THROW(load_idx_glyphs(dir.file("short.idx")), FormatError);
}

TEST(MnistPp, ShapeRangeAndDeterminism) {
  const MnistPpConfig cfg;
  const auto a = gen_mnistpp(cfg, 42, 6);
  const auto b = gen_mnistpp(cfg, 42, 6);
  const auto c = gen_mnistpp(cfg, 43, 6);
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].frames, 10u);
    EXPECT_EQ(a[i].height, 64u);
    EXPECT_EQ(a[i].width, 64u);
    EXPECT_EQ(a[i].pixels.size(), 10u * 64 * 64);
    EXPECT_EQ(a[i], b[i]);
    EXPECT_NE(a[i], c[i]);
    EXPECT_GT(*std::max_element(a[i].pixels.begin(), a[i].pixels.end()), 100);
  }
  // Each index is independent of how many samples are requested.
  EXPECT_EQ(gen_mnistpp(cfg, 42, 3)[2], a[2]);
  EXPECT_EQ(generate_sequence(cfg, builtin_glyphs(), 42, 5), a[5]);
}

TEST(MnistPp, FramesMoveByDefault) {
  const auto s = gen_mnistpp(MnistPpConfig{}, 7, 1)[0];
  EXPECT_FALSE(std::equal(s.frame(0), s.frame(1), s.frame(1)));
}

TEST(MnistPp, StaticLimitRepeatsTheFirstFrame) {
  const auto cfg = MnistPpConfig::frozen();
  for (const auto& s : gen_mnistpp(cfg, 9, 4)) {
    for (std::size_t t = 1; t < s.frames; ++t) EXPECT_TRUE(std::equal(s.frame(0), s.frame(1), s.frame(t))) << t;
  }
}

TEST(MnistPp, DigitsStayInsideThePatch) {
  MnistPpConfig cfg;
  cfg.frames = 40;
  cfg.velocity_min = 3.0;
  cfg.velocity_max = 6.0;
  const auto glyphs = builtin_glyphs();
  for (std::uint64_t i = 0; i < 25; ++i) {
    std::vector<DigitBox> boxes;
    generate_sequence_traced(cfg, glyphs, 3, i, boxes);
    ASSERT_EQ(boxes.size(), cfg.frames * cfg.digits_per_seq);
    for (const auto& b : boxes) {
      EXPECT_GE(b.x0, -1e-9);
      EXPECT_GE(b.y0, -1e-9);
      EXPECT_LE(b.x1, 64 + 1e-9);
      EXPECT_LE(b.y1, 64 + 1e-9);
    }
  }
}

TEST(MnistPp, ConfigValidation) {
  const auto glyphs = builtin_glyphs();
  MnistPpConfig cfg;
  EXPECT_NO_THROW(cfg.validate(glyphs));
  cfg.patch = 32;  // rotated 1.5x glyph no longer fits
  EXPECT_THROW(cfg.validate(glyphs), std::invalid_argument);
  cfg = MnistPpConfig{};
  cfg.velocity_min = 4;
  cfg.velocity_max = 2;
  EXPECT_THROW(cfg.validate(glyphs), std::invalid_argument);
  EXPECT_THROW(MnistPpConfig{}.validate({}), std::invalid_argument);
}

TEST(Pnm, RoundTripAndComments) {
  TempDir dir("pnm");
  Image g = noisy(5, 3, 1, 0, 255);
  write_pgm(g, dir.file("a.pgm"));
  const auto back = read_pnm(dir.file("a.pgm"));
  EXPECT_EQ(back.pixels, g.pixels);
  EXPECT_EQ(back.width, 5u);

  std::string text = "P5\n# comment\n2 1 # trailing\n255\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  bytes.push_back(7);
  bytes.push_back(9);
  const auto img = decode_pnm(bytes);
  EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{7, 9}));

  Image rgb{1, 1, 3, {255, 0, 0}};
  EXPECT_EQ(to_gray(rgb).pixels[0], 76);  // 0.299 * 255 = 76.2
  write_ppm(Image{2, 1, 3, {10, 20, 30, 40, 50, 60}}, dir.file("c.ppm"));
  EXPECT_EQ(read_pnm(dir.file("c.ppm")).channels, 3u);
}

TEST(Pnm, RejectsMalformedFiles) {
  const std::string bad_magic = "P2\n1 1\n255\n";
  try {
    decode_pnm({bad_magic.begin(), bad_magic.end()});
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  const std::string deep = "P5\n1 1\n65535\n";
  EXPECT_THROW(decode_pnm({deep.begin(), deep.end()}), FormatError);
  const std::string truncated = "P5\n2 2\n255\n";
  std::vector<std::uint8_t> t(truncated.begin(), truncated.end());
  t.push_back(1);
  EXPECT_THROW(decode_pnm(t), FormatError);
}

TEST(Container, RoundTripIsBitExact) {
  TempDir dir("scsq");
  const auto d = random_dataset(5, 3, 4, 7, 11);
  write_container(d, dir.file("d.scsq"));
  const auto bytes = read_file(dir.file("d.scsq"));
  EXPECT_EQ(bytes.size(), kContainerHeaderBytes + 5u * 3 * 4 * 7);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SCSQ");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 5);  // count, little endian
  const auto back = read_container(dir.file("d.scsq"));
  EXPECT_EQ(back, d);
  EXPECT_EQ(encode_container(back), bytes);
}

TEST(Container, ThousandSequencePayload) {
  const auto d = random_dataset(1000, 10, 64, 64, 12);
  const auto bytes = encode_container(d);
  EXPECT_EQ(bytes.size(), 40960000u + 25u);
  EXPECT_EQ(decode_container(bytes), d);
}

TEST(Container, RejectsCorruptionWithOffsets) {
  auto bytes = encode_container(random_dataset(2, 2, 3, 3, 13));
  auto check = [](const std::vector<std::uint8_t>& b, std::size_t offset) {
    try {
      decode_container(b);
      ADD_FAILURE() << "accepted corrupt container";
    } catch (const FormatError& e) {
      EXPECT_EQ(e.offset(), offset) << e.what();
    }
  };
  auto magic = bytes;
  magic[0] = 'X';
  check(magic, 0);
  auto version = bytes;
  version[4] = 2;
  check(version, 4);
  auto truncated = bytes;
  truncated.pop_back();
  check(truncated, truncated.size());
  auto header_only = std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 10);
  check(header_only, 9);  // the frames field starting at byte 9 is cut short
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_container(trailing), FormatError);
  auto channels = bytes;
  channels[21] = 3;
  EXPECT_THROW(decode_container(channels), FormatError);
  EXPECT_THROW(encode_container({SequenceSample(2, 3, 3), SequenceSample(3, 3, 3)}), ShapeError);
}

TEST(Split, DeterministicDisjointAndExhaustive) {
  auto d = random_dataset(10, 1, 2, 2, 14);
  for (std::size_t i = 0; i < d.size(); ++i) d[i].pixels[0] = static_cast<std::uint8_t>(i);  // unique keys
  const auto a = split(d, 0.8, 3);
  const auto b = split(d, 0.8, 3);
  ASSERT_EQ(a.train.size(), 8u);
  ASSERT_EQ(a.test.size(), 2u);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::multiset<int> keys;
  for (const auto* part : {&a.train, &a.test})
    for (const auto& s : *part) keys.insert(s.pixels[0]);
  EXPECT_EQ(keys.size(), 10u);
  EXPECT_EQ(std::set<int>(keys.begin(), keys.end()).size(), 10u);
  EXPECT_THROW(split(d, 0.99, 3), std::invalid_argument);
  EXPECT_THROW(split(d, 1.0, 3), std::invalid_argument);
  EXPECT_THROW(split(d, 0.0, 3), std::invalid_argument);
}

TEST(Timestamps, ParsesFirstValidDigitRun) {
  EXPECT_EQ(parse_timestamp("FY2F_201906010000.pgm"), kBase);
  EXPECT_EQ(parse_timestamp(stamp_name(kBase + 1470)), kBase + 1470);
  EXPECT_EQ(parse_timestamp("ir_201913010000_201906010030.pgm"), kBase + 30);  // month 13 skipped
  EXPECT_FALSE(parse_timestamp("cloud.pgm").has_value());
  EXPECT_FALSE(parse_timestamp("20190601.pgm").has_value());
  EXPECT_EQ(parse_background_mode("median"), BackgroundMode::per_pixel_median);
  EXPECT_THROW(parse_background_mode("mean"), std::invalid_argument);
}

TEST(Pipeline, SevenFramesAtExactSpacingMakeOneRun) {
  auto cfg = small_cfg();
  cfg.crops_per_window = 3;
  const auto r = build_sequences(series(every30(7)), cfg, 5);
  ASSERT_EQ(r.runs.size(), 1u);
  EXPECT_EQ(r.runs[0].size(), 7u);
  EXPECT_EQ(r.windows, 1u);
  ASSERT_EQ(r.samples.size(), 3u);
  for (const auto& s : r.samples) {
    EXPECT_EQ(s.frames, 7u);
    EXPECT_EQ(s.height, 8u);
    EXPECT_EQ(s.timestamps.size(), 7u);
  }
}

TEST(Pipeline, GapsSplitRuns) {
  // 7 frames, a 60-minute gap, 7 more, a 31-minute step, 3 more.
  auto offsets = every30(7);
  for (auto o : every30(7, 240)) offsets.push_back(o);
  for (auto o : every30(3, 451)) offsets.push_back(o);
  auto frames = series(offsets);
  std::reverse(frames.begin(), frames.end());  // input order must not matter
  const auto r = build_sequences(frames, small_cfg(), 5);
  ASSERT_EQ(r.runs.size(), 3u);
  EXPECT_EQ(r.runs[0].size(), 7u);
  EXPECT_EQ(r.runs[1].size(), 7u);
  EXPECT_EQ(r.runs[2].size(), 3u);
  EXPECT_EQ(r.runs[1].front(), stamp_name(kBase + 240));
  EXPECT_EQ(r.windows, 2u);
  for (const auto& s : r.samples) {
    // Every sequence stays within one run.
    const bool first = std::find(r.runs[0].begin(), r.runs[0].end(), s.timestamps.front()) != r.runs[0].end();
    const auto& run = first ? r.runs[0] : r.runs[1];
    for (const auto& t : s.timestamps) EXPECT_NE(std::find(run.begin(), run.end(), t), run.end());
  }
}

TEST(Pipeline, WindowStrideControlsOverlap) {
  auto cfg = small_cfg();
  EXPECT_EQ(build_sequences(series(every30(16)), cfg, 1).windows, 2u);
  cfg.window_stride = 1;
  EXPECT_EQ(build_sequences(series(every30(16)), cfg, 1).windows, 10u);
}

TEST(Pipeline, ConstantBackgroundSubtractsToZero) {
  std::vector<TimedFrame> frames;
  for (auto o : every30(7)) frames.push_back({kBase + o, stamp_name(kBase + o), gray(10, 10, 77)});
  auto cfg = small_cfg();
  for (auto mode : {BackgroundMode::per_pixel_min, BackgroundMode::per_pixel_median}) {
    cfg.background = mode;
    const auto r = build_sequences(frames, cfg, 2);
    ASSERT_EQ(r.samples.size(), 1u);
    for (auto p : r.samples[0].pixels) EXPECT_EQ(p, 0);
  }
  cfg.background = BackgroundMode::external_file;
  cfg.background_file = "unused";
  const Image bg = gray(10, 10, 77);
  const auto r = build_sequences(frames, cfg, 2, &bg);
  for (auto p : r.samples[0].pixels) EXPECT_EQ(p, 0);
  const Image wrong = gray(9, 10, 0);
  EXPECT_THROW(build_sequences(frames, cfg, 2, &wrong), ShapeError);
}

TEST(Pipeline, BackgroundClampsAtZero) {
  std::vector<TimedFrame> frames;
  for (auto o : every30(7)) frames.push_back({kBase + o, stamp_name(kBase + o), gray(10, 10, 50)});
  frames[3].image.pixels[0] = 90;
  auto cfg = small_cfg();
  cfg.crop = 10;
  cfg.background = BackgroundMode::external_file;
  cfg.background_file = "unused";
  const Image bg = gray(10, 10, 60);
  const auto r = build_sequences(frames, cfg, 2, &bg);
  ASSERT_EQ(r.samples.size(), 1u);
  EXPECT_EQ(r.samples[0].frame(3)[0], 30);
  EXPECT_EQ(r.samples[0].frame(3)[1], 0);
}

TEST(Pipeline, RgbFramesAreConvertedToGray) {
  std::vector<TimedFrame> frames;
  for (auto o : every30(7)) {
    Image rgb{8, 8, 3, std::vector<std::uint8_t>(8 * 8 * 3, 0)};
    frames.push_back({kBase + o, stamp_name(kBase + o), rgb});
  }
  frames[6].image.pixels[0] = 255;  // red pixel in the last frame
  auto cfg = small_cfg();
  const auto r = build_sequences(frames, cfg, 1);
  EXPECT_EQ(r.samples[0].frame(6)[0], 76);
}

TEST(Pipeline, BlackInputsAreAllRejected) {
  std::vector<TimedFrame> frames;
  for (auto o : every30(14)) frames.push_back({kBase + o, stamp_name(kBase + o), gray(10, 10, 0)});
  NephoPipelineConfig cfg;
  cfg.crop = 8;
  const auto r = build_sequences(frames, cfg, 1);
  EXPECT_TRUE(r.samples.empty());
  EXPECT_EQ(r.rejected_crops, 2u);
}

TEST(Pipeline, RaisingTheThresholdNeverAddsSamples) {
  auto frames = series(every30(40), 77);
  // Dim some frames so crops straddle the threshold range.
  for (std::size_t i = 0; i < frames.size(); i += 3)
    for (auto& p : frames[i].image.pixels) p = static_cast<std::uint8_t>(p / 4);
  auto cfg = small_cfg();
  cfg.crops_per_window = 4;
  cfg.window_stride = 1;
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (double thr = 0; thr <= 120; thr += 5) {
    cfg.min_mean_intensity = thr;
    const auto n = build_sequences(frames, cfg, 8).samples.size();
    EXPECT_LE(n, prev) << thr;
    prev = n;
  }
  EXPECT_EQ(prev, 0u);
}

TEST(Pipeline, SeededAndShuffled) {
  auto cfg = small_cfg();
  cfg.crops_per_window = 2;
  cfg.window_stride = 1;
  const auto a = build_sequences(series(every30(20)), cfg, 4);
  const auto b = build_sequences(series(every30(20)), cfg, 4);
  const auto c = build_sequences(series(every30(20)), cfg, 5);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
}

TEST(Pipeline, ValidatesConfig) {
  auto cfg = small_cfg();
  cfg.crop = 11;
  EXPECT_THROW(build_sequences(series(every30(7)), cfg, 1), ShapeError);
  cfg = small_cfg();
  cfg.interval_minutes = 0;
  EXPECT_THROW(build_sequences(series(every30(7)), cfg, 1), std::invalid_argument);
}

TEST(Pipeline, ReadsDirectoriesAndSkipsUnstampedFiles) {
  TempDir dir("nepho");
  for (auto o : every30(7)) write_pgm(noisy(12, 10, o), dir.file(stamp_name(kBase + o)));
  write_pgm(noisy(12, 10, 99), dir.file("notes.pgm"));
  write_file(dir.file("readme.txt"), {'h', 'i'});
  auto cfg = small_cfg();
  const auto r = prep_nephograms(dir.path().string(), cfg, 3);
  EXPECT_EQ(r.samples.size(), 1u);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("notes.pgm"), std::string::npos);

  TempDir black("nepho_black");
  for (auto o : every30(7)) write_pgm(gray(12, 10, 0), black.file(stamp_name(kBase + o)));
  cfg.min_mean_intensity = 4;
  EXPECT_THROW(prep_nephograms(black.path().string(), cfg, 3), std::runtime_error);
}
