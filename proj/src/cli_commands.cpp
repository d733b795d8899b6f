#include "vhd/cli_commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "vhd/checkpoint.hpp"
#include "vhd/data.hpp"
#include "vhd/eval.hpp"
#include "vhd/hardpairs.hpp"
#include "vhd/losses.hpp"
#include "vhd/model.hpp"
#include "vhd/parallel.hpp"
#include "vhd/run_config.hpp"
#include "vhd/training.hpp"

namespace vhd::cli {

namespace fs = std::filesystem;

namespace {

RunConfig load_config(const std::string& file, const std::vector<std::string>& overrides) {
  if (file.empty()) return RunConfig::load(nullptr, overrides);
  const fs::path p(file);
  return RunConfig::load(&p, overrides);
}

struct InferenceBundle {
  RunConfig cfg;
  ModelParams params;
  Manifest manifest;
  fs::path manifest_dir;
};

InferenceBundle load_for_inference(const InferArgs& args) {
  InferenceBundle b;
  const fs::path manifest_path(args.manifest);
  b.manifest = read_manifest(manifest_path);
  b.manifest_dir = manifest_path.parent_path();

  fs::path config_path;
  if (!args.config.empty()) {
    config_path = args.config;
  } else {
    config_path = fs::path(args.checkpoint).parent_path() / "config.json";
    if (!fs::exists(config_path)) {
      throw ConfigError("no config given and '" + config_path.string() +
                        "' does not exist; pass --config");
    }
  }
  b.cfg = RunConfig::load(&config_path, {});
  b.cfg.resolve_input_dims(b.manifest.entries.front().d_in_v, b.manifest.entries.front().d_in_a);
  b.cfg.model.validate();
  b.params = ModelParams::from_map(b.cfg.model, load_checkpoint(args.checkpoint));
  return b;
}

ModelOutput forward_eval(const VideoSequence& seq, const InferenceBundle& b) {
  Tape tape;
  return model_forward(tape, seq.visual, seq.audio, b.params, b.cfg.model, Mode::kEval);
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::string>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << header << "\n";
  for (const std::string& row : rows) out << row << "\n";
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace

int cmd_synth(const SynthArgs& args) {
  if (args.out.empty()) throw ConfigError("synth: --out is required");
  SynthConfig cfg;
  cfg.train_videos = args.videos;
  cfg.test_videos = args.test_videos;
  cfg.t_full = args.segments;
  cfg.d_in_v = args.dv;
  cfg.d_in_a = args.da;
  cfg.separation = args.sep;
  cfg.noise = args.noise;
  cfg.seed = args.seed;
  const Manifest manifest = synth_generate(cfg, args.out);
  std::cout << "wrote " << manifest.entries.size() << " videos ("
            << manifest.split_entries("train").size() << " train, "
            << manifest.split_entries("test").size() << " test) under " << args.out << "\n";
  return 0;
}

int cmd_train(const TrainArgs& args) {
  const fs::path manifest_path(args.manifest);
  const Manifest manifest = read_manifest(manifest_path);
  RunConfig cfg = load_config(args.config, args.overrides);
  if (args.seed) cfg.train.seed = *args.seed;
  cfg.resolve_input_dims(manifest.entries.front().d_in_v, manifest.entries.front().d_in_a);
  cfg.model.validate();
  cfg.train.validate();

  std::vector<VideoSequence> train_set;
  for (const ManifestEntry& e : manifest.split_entries("train")) {
    train_set.push_back(load_entry(e, manifest_path.parent_path()));
  }
  if (train_set.empty()) throw DataError("manifest has no train videos");

  const fs::path out_dir(args.out);
  fs::create_directories(out_dir);
  cfg.save(out_dir / "config.json");

  ModelParams params = ModelParams::init(cfg.model, Rng(cfg.train.seed));
  const FitResult result = fit(train_set, params, cfg.model, cfg.train, out_dir);
  const EpochStats& last = result.history.back();
  std::cout << "trained " << cfg.train.epochs << " epochs over " << train_set.size()
            << " videos; final mean losses: ce " << last.ce << ", hpcl " << last.hpcl
            << ", rank " << last.rank << ", total " << last.total << "\n";
  std::cout << "checkpoint: " << (out_dir / "model.chkp").string() << "\n";
  return 0;
}

int cmd_eval(const InferArgs& args) {
  if (args.protocol != "map" && args.protocol != "top5") {
    throw ConfigError("eval: protocol must be map or top5, got '" + args.protocol + "'");
  }
  const InferenceBundle b = load_for_inference(args);
  const std::vector<ManifestEntry> test = b.manifest.split_entries("test");
  if (test.empty()) throw DataError("manifest has no test videos");

  std::vector<std::vector<double>> scores(test.size());
  parallel_for(static_cast<int>(test.size()), [&](int i) {
    const VideoSequence seq = load_entry(test[static_cast<std::size_t>(i)], b.manifest_dir);
    const ModelOutput out = forward_eval(seq, b);
    scores[static_cast<std::size_t>(i)] = out.y_fused.data();
  });
  std::map<std::string, std::vector<double>> predictions;
  for (std::size_t i = 0; i < test.size(); ++i) {
    predictions.emplace(test[i].id, std::move(scores[i]));
  }
  const EvalReport report = map_report(predictions, b.manifest, b.manifest_dir, args.protocol);
  if (!args.out.empty()) write_report(report, args.out);
  for (const auto& [category, value] : report.category_map) {
    std::cout << category << ": " << value << "\n";
  }
  std::cout << "dataset " << (args.protocol == "map" ? "mAP" : "top-5 mAP") << ": "
            << report.dataset_average << "\n";
  return 0;
}

int cmd_predict(const InferArgs& args) {
  const InferenceBundle b = load_for_inference(args);
  const fs::path out_dir(args.out.empty() ? "." : args.out);
  fs::create_directories(out_dir);
  const auto& entries = b.manifest.entries;
  std::vector<std::vector<std::string>> rows(entries.size());
  parallel_for(static_cast<int>(entries.size()), [&](int i) {
    const VideoSequence seq = load_entry(entries[static_cast<std::size_t>(i)], b.manifest_dir);
    const ModelOutput out = forward_eval(seq, b);
    std::vector<std::string>& r = rows[static_cast<std::size_t>(i)];
    char line[256];
    for (int s = 0; s < seq.length(); ++s) {
      std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g", s, out.y_fused(s),
                    out.y_tilde(s), out.y_v(s), out.y_a(s));
      r.emplace_back(line);
    }
  });
  for (std::size_t i = 0; i < entries.size(); ++i) {
    write_csv(out_dir / (entries[i].id + "_scores.csv"),
              "segment_index,y_fused,y_tilde,y_v,y_a", rows[i]);
  }
  std::cout << "wrote " << entries.size() << " score files under " << out_dir.string() << "\n";
  return 0;
}

int cmd_embed(const InferArgs& args) {
  const InferenceBundle b = load_for_inference(args);
  const fs::path out_dir(args.out.empty() ? "." : args.out);
  fs::create_directories(out_dir);
  const auto& entries = b.manifest.entries;
  std::vector<std::vector<std::string>> rows(entries.size());
  std::vector<int> widths(entries.size());
  parallel_for(static_cast<int>(entries.size()), [&](int i) {
    const VideoSequence seq = load_entry(entries[static_cast<std::size_t>(i)], b.manifest_dir);
    const ModelOutput out = forward_eval(seq, b);
    const Tensor& f = out.f_hat;
    widths[static_cast<std::size_t>(i)] = f.cols();
    std::vector<std::string>& r = rows[static_cast<std::size_t>(i)];
    char cell[64];
    for (int s = 0; s < seq.length(); ++s) {
      std::string line = std::to_string(s) + "," +
                         std::to_string(static_cast<int>(seq.labels[static_cast<std::size_t>(s)]));
      for (int j = 0; j < f.cols(); ++j) {
        std::snprintf(cell, sizeof(cell), ",%.17g", f(s, j));
        line += cell;
      }
      r.push_back(std::move(line));
    }
  });
  for (std::size_t i = 0; i < entries.size(); ++i) {
    std::string header = "segment_index,label";
    for (int j = 0; j < widths[i]; ++j) header += ",e" + std::to_string(j);
    write_csv(out_dir / (entries[i].id + "_embed.csv"), header, rows[i]);
  }
  std::cout << "wrote " << entries.size() << " embedding files under " << out_dir.string()
            << "\n";
  return 0;
}

int cmd_gradcheck(const GradcheckArgs& args) {
  RunConfig cfg;
  // toy operating point; a config file or overrides may adjust it within
  // the enforced bounds
  cfg.model.d = 16;
  cfg.model.d_k = 32;
  cfg.model.d_v = 32;
  cfg.model.n_layers = 1;
  cfg.model.heads = 2;
  cfg.model.dropout = 0.0;
  cfg.model.d_in_visual = 8;
  cfg.model.d_in_audio = 6;
  if (!args.config.empty()) {
    const fs::path p(args.config);
    cfg = RunConfig::load(&p, args.overrides);
  } else {
    for (const std::string& kv : args.overrides) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + kv + "' is not KEY=VALUE");
      }
      cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
  }
  if (cfg.model.d_in_visual == 0) cfg.model.d_in_visual = 8;
  if (cfg.model.d_in_audio == 0) cfg.model.d_in_audio = 6;
  cfg.model.validate();

  const int t = args.sequence_length;
  if (cfg.model.d > 32 || t > 8 || t < 2) {
    throw ConfigError("gradcheck: toy dims enforced (d <= 32, 2 <= T <= 8); got d=" +
                      std::to_string(cfg.model.d) + ", T=" + std::to_string(t));
  }
  if (cfg.model.dropout != 0.0) {
    throw ConfigError(
        "gradcheck: dropout makes the objective non-deterministic; set dropout=0");
  }

  Rng rng(args.seed);
  Rng vr = rng.split(1), ar = rng.split(2);
  const Tensor v = Tensor::rand_uniform({t, cfg.model.d_in_visual}, vr, -1.0, 1.0);
  const Tensor a = Tensor::rand_uniform({t, cfg.model.d_in_audio}, ar, -1.0, 1.0);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(t));
  Rng lr = rng.split(3);
  for (auto& l : labels) l = lr.next_below(2) ? 1 : 0;
  labels[0] = 1;
  labels[static_cast<std::size_t>(t) - 1] = 0;

  const ModelParams params = ModelParams::init(cfg.model, rng.split(4));
  const LossConfig loss_cfg = cfg.train.loss;
  const HardPairSet pairs = sample_hard_pairs(labels, cfg.train.hard_pair_region);
  const ModelConfig model_cfg = cfg.model;

  ScalarFn objective = [&](Tape& tape, const ParamMap& pm) {
    const ModelParams mp = ModelParams::from_map(model_cfg, pm);
    const ModelOutput out = model_forward(tape, v, a, mp, model_cfg, Mode::kEval);
    std::vector<Tensor> active;
    for (Head h : out.active) {
      active.push_back(h == Head::kTilde ? out.y_tilde
                       : h == Head::kVisual ? out.y_v
                                            : out.y_a);
    }
    const Tensor ce = ce_loss(tape, active, labels);
    const Tensor hpcl = hpcl_loss(tape, out.f_hat, labels, loss_cfg);
    const Tensor rank = rank_loss(tape, out.f_hat, pairs, loss_cfg);
    return total_loss(tape, ce, hpcl, rank, loss_cfg);
  };

  FiniteDiffOptions opt;
  opt.h = 1e-5;
  opt.tol = args.tol;
  opt.denom_floor = 1e-4;
  opt.max_coords_per_tensor = 48;
  opt.coord_seed = args.seed;
  opt.inject_grad_error = args.corrupt_gradient ? 1.0 : 0.0;

  const FiniteDiffReport report = finite_diff_check(objective, params.to_map(), opt);
  std::printf("objective value: %.12g\n", report.loss_value);
  for (const GroupReport& g : report.groups) {
    std::printf("%-24s max rel err %.3e  (%lld coords, analytic %.6g vs fd %.6g)\n",
                g.name.c_str(), g.max_rel_err, static_cast<long long>(g.coords_checked),
                g.worst_analytic, g.worst_numeric);
  }
  std::printf("worst relative error: %.3e (tolerance %.1e)\n", report.max_rel_err, report.tol);
  if (!report.pass) {
    throw CheckError("gradient check failed: worst relative error " +
                     std::to_string(report.max_rel_err) + " exceeds tolerance");
  }
  std::printf("gradient check passed\n");
  return 0;
}

}  // namespace vhd::cli
