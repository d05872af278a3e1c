#include "nowcast/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include "nowcast/datasets/container.hpp"
#include "nowcast/datasets/mnistpp.hpp"
#include "nowcast/datasets/nephogram.hpp"
#include "nowcast/datasets/pnm.hpp"
#include "nowcast/objectives.hpp"
#include "nowcast/trainer/checkpoint.hpp"
#include "nowcast/trainer/fit.hpp"

namespace nowcast::cli {

namespace {

using nlohmann::json;
using Model = models::ModelGraph<float>;

std::vector<std::size_t> parse_list(const std::string& text, const char* flag) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size() || v == 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string(flag) + ": expected positive integers, got '" + item + "'");
    }
  }
  if (out.empty()) throw std::invalid_argument(std::string(flag) + ": empty list");
  return out;
}

std::string default_log_path(const std::string& ckpt) { return ckpt + ".log.jsonl"; }

// Flags shared by everything that builds a model.
struct ModelFlags {
  std::string kind = "fclstm";
  std::string channels;
  std::string preset = "auto";
  std::size_t frames_in = 0;
  std::size_t kernel = 3;
  std::size_t hidden = 256;
  bool peephole = false;
};

// Default widths: the 64x64, 10-frame synthetic set gets the larger model.
models::ModelConfig make_model_config(const ModelFlags& f, const datasets::Dataset& data) {
  const auto& s = data.front();
  const std::size_t frames_in = f.frames_in == 0 ? s.frames - 1 : f.frames_in;
  if (frames_in + 1 > s.frames) {
    throw std::invalid_argument("--frames-in " + std::to_string(frames_in) + " needs sequences of at least " +
                                std::to_string(frames_in + 1) + " frames; data has " +
                                std::to_string(s.frames));
  }
  std::string preset = f.preset;
  if (preset == "auto") preset = s.frames == 10 ? "mnistpp" : "nephogram";
  if (preset != "mnistpp" && preset != "nephogram") {
    throw std::invalid_argument("--preset must be auto, mnistpp or nephogram");
  }
  const auto kind = models::parse_model_kind(f.kind);
  switch (kind) {
    case models::ModelKind::fclstm: {
      models::FclstmConfig c;
      c.channels = preset == "mnistpp" ? std::vector<std::size_t>{32, 32, 64, 64, 128, 128}
                                       : std::vector<std::size_t>{16, 16, 32, 32, 64, 64};
      if (!f.channels.empty()) c.channels = parse_list(f.channels, "--channels");
      if (c.channels.size() % 2 != 0) throw std::invalid_argument("--channels: fclstm needs pairs of widths");
      c.scales = c.channels.size() / 2;
      c.kernel = f.kernel;
      c.peephole = f.peephole;
      c.height = s.height;
      c.width = s.width;
      c.input_frames = frames_in;
      return c;
    }
    case models::ModelKind::clstm: {
      models::ClstmConfig c;
      if (!f.channels.empty()) c.channels = parse_list(f.channels, "--channels");
      c.kernel = f.kernel;
      c.peephole = f.peephole;
      c.height = s.height;
      c.width = s.width;
      c.input_frames = frames_in;
      return c;
    }
    case models::ModelKind::fc_lstm: {
      models::FcLstmConfig c;
      c.hidden = f.hidden;
      c.height = s.height;
      c.width = s.width;
      c.input_frames = frames_in;
      return c;
    }
    case models::ModelKind::mlp: {
      models::MlpConfig c;
      c.hidden = f.hidden;
      c.height = s.height;
      c.width = s.width;
      c.input_frames = frames_in;
      return c;
    }
  }
  throw std::invalid_argument("unreachable");
}

datasets::Dataset load_data(const std::string& path) {
  auto data = datasets::read_container(path);
  if (data.empty()) throw std::invalid_argument(path + ": container holds no sequences");
  return data;
}

void require_compatible(const Model& model, const datasets::Dataset& data, const std::string& what) {
  const auto& s = data.front();
  if (s.height != models::height_of(model.config) || s.width != models::width_of(model.config) ||
      s.frames < models::input_frames_of(model.config) + 1) {
    throw std::invalid_argument(what + ": data " + std::to_string(s.frames) + "x" +
                                std::to_string(s.height) + "x" + std::to_string(s.width) +
                                " does not fit the checkpoint's model");
  }
}

std::uint8_t to_pixel(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

int run_gen(const std::string& out, std::size_t count, std::uint64_t seed,
            datasets::MnistPpConfig cfg, bool frozen, std::ostream& os) {
  if (frozen) {
    const auto keep = cfg;
    cfg = datasets::MnistPpConfig::frozen();
    cfg.patch = keep.patch;
    cfg.frames = keep.frames;
    cfg.glyph_source = keep.glyph_source;
  }
  const auto data = datasets::gen_mnistpp(cfg, seed, count);
  datasets::write_container(data, out);
  os << json{{"command", "gen-mnistpp"}, {"out", out},           {"count", count},
             {"frames", cfg.frames},     {"height", cfg.patch},  {"width", cfg.patch},
             {"seed", seed},             {"bytes", datasets::kContainerHeaderBytes +
                                                       count * cfg.frames * cfg.patch * cfg.patch}}
            .dump()
     << '\n';
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Next-frame nowcasting with convolutional LSTMs", "nowcast"};
  app.require_subcommand(1);

  // gen-mnistpp
  auto* gen = app.add_subcommand("gen-mnistpp", "Generate Moving MNIST++ sequences");
  std::string gen_out;
  std::size_t gen_count = 0;
  std::uint64_t seed = 0;
  datasets::MnistPpConfig mcfg;
  bool gen_frozen = false;
  gen->add_option("--out", gen_out, "Output .scsq file")->required();
  gen->add_option("--count", gen_count, "Number of sequences")->required();
  gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--frames", mcfg.frames, "Frames per sequence")->capture_default_str();
  gen->add_option("--patch", mcfg.patch, "Patch size in pixels")->capture_default_str();
  gen->add_option("--digits", mcfg.digits_per_seq, "Digits per sequence")->capture_default_str();
  gen->add_option("--glyphs", mcfg.glyph_source, "IDX digit image file (default: built-in glyphs)");
  gen->add_flag("--static", gen_frozen, "Disable motion and all drifts");

  // prep-nephograms
  auto* prep = app.add_subcommand("prep-nephograms", "Build sequences from timestamped nephograms");
  std::string prep_src, prep_out, prep_test_out, prep_bg = "min";
  double prep_fraction = 0;
  datasets::NephoPipelineConfig ncfg;
  prep->add_option("--src", prep_src, "Directory of PGM/PPM frames named with YYYYMMDDHHMM")->required();
  prep->add_option("--out", prep_out, "Output .scsq (training part when --test-out is given)")->required();
  prep->add_option("--test-out", prep_test_out, "Also split off a test .scsq");
  prep->add_option("--train-fraction", prep_fraction, "Training share for --test-out")->default_val(0.9);
  prep->add_option("--seed", seed, "Random seed");
  prep->add_option("--interval", ncfg.interval_minutes, "Minutes between frames")->capture_default_str();
  prep->add_option("--seq-len", ncfg.seq_len, "Frames per sequence")->capture_default_str();
  prep->add_option("--crop", ncfg.crop, "Crop size")->capture_default_str();
  prep->add_option("--crops-per-window", ncfg.crops_per_window, "Crops per window")->capture_default_str();
  prep->add_option("--stride", ncfg.window_stride, "Window stride (0 = seq-len)")->capture_default_str();
  prep->add_option("--background", prep_bg, "min, median or file")->capture_default_str();
  prep->add_option("--background-file", ncfg.background_file, "Background image for --background file");
  prep->add_option("--min-mean", ncfg.min_mean_intensity, "Low-content threshold")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  std::string data_path, eval_path, ckpt, log_path, resume, loss = "mse";
  ModelFlags mf;
  trainer::TrainConfig tcfg;
  train->add_option("--data", data_path, "Training .scsq")->required();
  train->add_option("--eval-data", eval_path, "Evaluation .scsq");
  train->add_option("--model", mf.kind, "fclstm, clstm, fc_lstm or mlp")->capture_default_str();
  train->add_option("--loss", loss, "mse or forecaster")->capture_default_str();
  train->add_option("--lr", tcfg.optimizer.lr, "Learning rate")->capture_default_str();
  train->add_option("--epochs", tcfg.epochs, "Epochs")->capture_default_str();
  train->add_option("--batch-size", tcfg.batch_size, "Minibatch size")->capture_default_str();
  train->add_option("--seed", seed, "Random seed");
  train->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  train->add_option("--log", log_path, "JSON-lines log (default: <ckpt>.log.jsonl)");
  train->add_option("--resume", resume, "Continue from this checkpoint");
  train->add_option("--eval-every", tcfg.eval_every, "Evaluate every N epochs")->capture_default_str();
  train->add_option("--channels", mf.channels, "Comma-separated layer widths");
  train->add_option("--preset", mf.preset, "Default widths: auto, mnistpp or nephogram")->capture_default_str();
  train->add_option("--frames-in", mf.frames_in, "Input frames (default: sequence length - 1)");
  train->add_option("--kernel", mf.kernel, "Convolution kernel size")->capture_default_str();
  train->add_option("--hidden", mf.hidden, "Hidden units for fc_lstm and mlp")->capture_default_str();
  train->add_option("--eccr-tau", tcfg.eccr_tau, "Cloud threshold for ECCR")->capture_default_str();
  train->add_flag("--peephole", mf.peephole, "Peephole connections in ConvLSTM cells");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  double tau = objectives::kDefaultEccrTau;
  eval->add_option("--data", data_path, "Test .scsq")->required();
  eval->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval->add_option("--eccr-tau", tau, "Cloud threshold for ECCR")->capture_default_str();

  // predict
  auto* predict = app.add_subcommand("predict", "Predict the next frame of one sequence");
  std::size_t index = 0;
  std::string pred_out;
  predict->add_option("--data", data_path, "Input .scsq")->required();
  predict->add_option("--ckpt", ckpt, "Checkpoint")->required();
  predict->add_option("--index", index, "Sequence index")->capture_default_str();
  predict->add_option("--out", pred_out, "Output PGM")->required();

  // render
  auto* render = app.add_subcommand("render", "Render inputs, truth and predictions as a PGM grid");
  std::vector<std::string> ckpts;
  std::string indices = "0", render_out;
  render->add_option("--data", data_path, "Input .scsq")->required();
  render->add_option("--ckpt", ckpts, "Checkpoint (repeat for several models)")->required();
  render->add_option("--indices", indices, "Comma-separated sequence indices")->capture_default_str();
  render->add_option("--out", render_out, "Output PGM")->required();

  std::vector<std::string> argv_store{"nowcast"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gen) return run_gen(gen_out, gen_count, seed, mcfg, gen_frozen, out);

    if (*prep) {
      ncfg.background = datasets::parse_background_mode(prep_bg);
      auto result = datasets::prep_nephograms(prep_src, ncfg, seed);
      for (const auto& w : result.warnings) err << "warning: " << w << '\n';
      json j{{"command", "prep-nephograms"}, {"runs", result.runs.size()}, {"windows", result.windows},
             {"rejected_crops", result.rejected_crops}, {"samples", result.samples.size()}};
      if (prep_test_out.empty()) {
        datasets::write_container(result.samples, prep_out);
        j["out"] = prep_out;
      } else {
        const auto parts = datasets::split(result.samples, prep_fraction, seed);
        datasets::write_container(parts.train, prep_out);
        datasets::write_container(parts.test, prep_test_out);
        j["out"] = prep_out;
        j["test_out"] = prep_test_out;
        j["train_samples"] = parts.train.size();
        j["test_samples"] = parts.test.size();
      }
      out << j.dump() << '\n';
      return 0;
    }

    if (*train) {
      const auto data = load_data(data_path);
      const auto eval_data = eval_path.empty() ? datasets::Dataset{} : load_data(eval_path);
      tcfg.loss = objectives::parse_loss_kind(loss);
      tcfg.seed = seed;
      tcfg.checkpoint_path = ckpt;
      tcfg.model = make_model_config(mf, data);
      if (log_path.empty()) log_path = default_log_path(ckpt);
      auto t = resume.empty() ? trainer::Trainer<float>(tcfg) : trainer::Trainer<float>::resume(resume, tcfg);
      require_compatible(t.model(), data, "train");
      if (!eval_data.empty()) require_compatible(t.model(), eval_data, "train");
      std::ofstream log(log_path, resume.empty() ? std::ios::trunc : std::ios::app);
      if (!log) throw std::runtime_error("cannot open log " + log_path);
      const auto logs = t.fit(data, eval_data, [&](const trainer::EpochLog& e) {
        const auto line = e.to_json().dump();
        log << line << '\n' << std::flush;
        err << line << '\n';
      });
      json j{{"command", "train"},
             {"model", models::to_string(t.model().kind())},
             {"loss", objectives::to_string(t.config().loss)},
             {"params", models::param_count(t.model())},
             {"epochs", t.epochs_done()},
             {"step", t.state().step},
             {"ckpt", ckpt},
             {"best_ckpt", trainer::best_checkpoint_path(ckpt)},
             {"log", log_path}};
      if (!logs.empty()) {
        j["train_loss"] = logs.back().train_loss;
        if (logs.back().eval) j["eval"] = objectives::to_json(*logs.back().eval);
      }
      out << j.dump() << '\n';
      return 0;
    }

    if (*eval) {
      const auto data = load_data(data_path);
      const auto ck = trainer::load_checkpoint<float>(ckpt);
      require_compatible(ck.model, data, "eval");
      out << objectives::to_json(objectives::evaluate_set(ck.model, data, tau)).dump() << '\n';
      return 0;
    }

    if (*predict) {
      const auto data = load_data(data_path);
      if (index >= data.size()) {
        throw std::out_of_range("--index " + std::to_string(index) + " out of range for " +
                                std::to_string(data.size()) + " sequences");
      }
      const auto ck = trainer::load_checkpoint<float>(ckpt);
      require_compatible(ck.model, data, "predict");
      const auto pred = objectives::predict_set(ck.model, datasets::Dataset{data[index]}).front();
      datasets::Image img;
      img.height = data[index].height;
      img.width = data[index].width;
      for (double v : pred.data()) img.pixels.push_back(to_pixel(v));
      datasets::write_pgm(img, pred_out);
      const auto target = data[index].target<double>();
      out << json{{"command", "predict"}, {"index", index}, {"out", pred_out},
                  {"mse", objectives::clamped_mse(target, pred)}}
                 .dump()
          << '\n';
      return 0;
    }

    if (*render) {
      const auto data = load_data(data_path);
      std::vector<std::size_t> rows;
      for (const auto& item : [&] {
             std::vector<std::string> parts;
             std::stringstream ss(indices);
             std::string p;
             while (std::getline(ss, p, ',')) parts.push_back(p);
             return parts;
           }()) {
        std::size_t used = 0;
        std::size_t v = 0;
        try {
          v = std::stoull(item, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used == 0 || used != item.size()) throw std::invalid_argument("--indices: bad index '" + item + "'");
        if (v >= data.size()) {
          throw std::out_of_range("--indices: " + std::to_string(v) + " out of range for " +
                                  std::to_string(data.size()) + " sequences");
        }
        rows.push_back(v);
      }
      if (rows.empty()) throw std::invalid_argument("--indices: empty list");
      const auto& s0 = data.front();
      if (s0.frames < 3) throw std::invalid_argument("render: sequences need at least 3 frames");
      datasets::Dataset selected;
      for (auto r : rows) selected.push_back(data[r]);
      std::vector<std::vector<Tensor<double>>> preds;
      for (const auto& path : ckpts) {
        const auto ck = trainer::load_checkpoint<float>(path);
        require_compatible(ck.model, data, "render");
        preds.push_back(objectives::predict_set(ck.model, selected));
      }

      constexpr std::size_t gutter = 2;
      const std::size_t h = s0.height, w = s0.width;
      const std::size_t cols = 3 + ckpts.size();
      datasets::Image grid;
      grid.width = cols * w + (cols - 1) * gutter;
      grid.height = rows.size() * h + (rows.size() - 1) * gutter;
      grid.pixels.assign(grid.width * grid.height, 255);
      auto blit = [&](std::size_t row, std::size_t col, auto&& pixel) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            grid.pixels[(row * (h + gutter) + y) * grid.width + col * (w + gutter) + x] = pixel(y * w + x);
          }
        }
      };
      for (std::size_t r = 0; r < selected.size(); ++r) {
        const auto& s = selected[r];
        for (std::size_t c = 0; c < 3; ++c) {
          const auto* f = s.frame(s.frames - 3 + c);
          blit(r, c, [&](std::size_t i) { return f[i]; });
        }
        for (std::size_t m = 0; m < preds.size(); ++m) {
          const auto p = preds[m][r].data();
          blit(r, 3 + m, [&](std::size_t i) { return to_pixel(p[i]); });
        }
      }
      datasets::write_pgm(grid, render_out);
      out << json{{"command", "render"}, {"out", render_out}, {"rows", rows.size()}, {"cols", cols},
                  {"width", grid.width}, {"height", grid.height}}
                 .dump()
          << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace nowcast::cli
