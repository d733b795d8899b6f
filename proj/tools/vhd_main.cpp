#include <iostream>

#include "CLI11.hpp"
#include "vhd/cli_commands.hpp"
#include "vhd/errors.hpp"

using namespace vhd;

// Exit codes: 0 ok, 2 config error, 3 data/format error, 4 check failure.
int main(int argc, char** argv) {
  CLI::App app{"visual-audio highlight detection over pre-extracted segment features"};
  app.require_subcommand(1);

  cli::SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset + manifest");
  synth_cmd->add_option("--videos", synth.videos, "training videos")->capture_default_str();
  synth_cmd->add_option("--test-videos", synth.test_videos, "held-out videos")
      ->capture_default_str();
  synth_cmd->add_option("--segments", synth.segments, "segments per video")
      ->capture_default_str();
  synth_cmd->add_option("--dv", synth.dv, "visual feature width")->capture_default_str();
  synth_cmd->add_option("--da", synth.da, "audio feature width")->capture_default_str();
  synth_cmd->add_option("--sep", synth.sep, "class center separation")->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise, "per-dimension noise scale")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "output directory")->required();

  cli::TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model from a manifest");
  train_cmd->add_option("--manifest", train.manifest, "dataset manifest")->required();
  train_cmd->add_option("--config", train.config, "flat JSON config file");
  train_cmd->add_option("--out", train.out, "output directory for checkpoint/history")
      ->required();
  train_cmd->add_option("--set", train.overrides, "config override KEY=VALUE (repeatable)");
  std::uint64_t train_seed = 0;
  CLI::Option* seed_opt =
      train_cmd->add_option("--seed", train_seed, "run seed (wins over config)");

  cli::InferArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score the test split and report mAP");
  eval_cmd->add_option("--manifest", eval_args.manifest, "dataset manifest")->required();
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "trained checkpoint")->required();
  eval_cmd->add_option("--config", eval_args.config,
                       "config file (default: config.json beside the checkpoint)");
  eval_cmd->add_option("--protocol", eval_args.protocol, "map or top5")->capture_default_str();
  eval_cmd->add_option("--out", eval_args.out, "report JSON path");

  cli::InferArgs predict_args;
  CLI::App* predict_cmd =
      app.add_subcommand("predict", "write per-video segment score CSV files");
  predict_cmd->add_option("--manifest", predict_args.manifest, "dataset manifest")->required();
  predict_cmd->add_option("--checkpoint", predict_args.checkpoint, "trained checkpoint")
      ->required();
  predict_cmd->add_option("--config", predict_args.config,
                          "config file (default: config.json beside the checkpoint)");
  predict_cmd->add_option("--out", predict_args.out, "output directory")->required();

  cli::InferArgs embed_args;
  CLI::App* embed_cmd =
      app.add_subcommand("embed", "dump per-segment embeddings for external analysis");
  embed_cmd->add_option("--manifest", embed_args.manifest, "dataset manifest")->required();
  embed_cmd->add_option("--checkpoint", embed_args.checkpoint, "trained checkpoint")->required();
  embed_cmd->add_option("--config", embed_args.config,
                        "config file (default: config.json beside the checkpoint)");
  embed_cmd->add_option("--out", embed_args.out, "output directory")->required();

  cli::GradcheckArgs grad;
  CLI::App* grad_cmd = app.add_subcommand(
      "gradcheck", "compare analytic gradients against central finite differences");
  grad_cmd->add_option("--config", grad.config, "flat JSON config file (toy dims by default)");
  grad_cmd->add_option("--set", grad.overrides, "config override KEY=VALUE (repeatable)");
  grad_cmd->add_option("--seed", grad.seed, "seed for data and parameters")
      ->capture_default_str();
  grad_cmd->add_option("--t", grad.sequence_length, "sequence length (<= 8)")
      ->capture_default_str();
  grad_cmd->add_option("--tol", grad.tol, "relative error tolerance")->capture_default_str();
  grad_cmd->add_flag("--corrupt-gradient", grad.corrupt_gradient,
                     "fault-injection hook: perturb one analytic gradient");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth_cmd) return cli::cmd_synth(synth);
    if (*train_cmd) {
      if (*seed_opt) train.seed = train_seed;
      return cli::cmd_train(train);
    }
    if (*eval_cmd) return cli::cmd_eval(eval_args);
    if (*predict_cmd) return cli::cmd_predict(predict_args);
    if (*embed_cmd) return cli::cmd_embed(embed_args);
    if (*grad_cmd) return cli::cmd_gradcheck(grad);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const CheckError& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
