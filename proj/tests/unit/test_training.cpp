#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "vhd/data.hpp"
#include "vhd/training.hpp"

using namespace vhd;
namespace fs = std::filesystem;

namespace {

// Textbook Adam recurrence tracked with separate scalar state.
struct AdamOracle {
  double m = 0.0, v = 0.0;
  double step(double theta, double g, int t, const TrainConfig& cfg) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m / (1.0 - std::pow(cfg.beta1, t));
    const double v_hat = v / (1.0 - std::pow(cfg.beta2, t));
    return theta - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
  }
};

ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.d = 16;
  cfg.d_k = 32;
  cfg.d_v = 32;
  cfg.n_layers = 1;
  cfg.heads = 2;
  cfg.dropout = 0.5;
  cfg.d_in_visual = 6;
  cfg.d_in_audio = 5;
  return cfg;
}

std::vector<VideoSequence> tiny_dataset(int videos, int t_full, const ModelConfig& mcfg,
                                        double separation, std::uint64_t seed) {
  const fs::path dir = fs::temp_directory_path() / ("vhd_test_fit_" + std::to_string(seed));
  fs::remove_all(dir);
  SynthConfig cfg;
  cfg.train_videos = videos;
  cfg.test_videos = 0;
  cfg.t_full = t_full;
  cfg.d_in_v = mcfg.d_in_visual;
  cfg.d_in_a = mcfg.d_in_audio;
  cfg.separation = separation;
  cfg.noise = 1.0;
  cfg.seed = seed;
  const Manifest manifest = synth_generate(cfg, dir);
  std::vector<VideoSequence> out;
  for (const ManifestEntry& e : manifest.split_entries("train")) {
    out.push_back(load_entry(e, dir));
  }
  fs::remove_all(dir);
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("training");

TEST_CASE("adam matches the textbook recurrence to 1e-12") {
  TrainConfig cfg;
  cfg.lr = 1e-3;

  AdamState::Slot slot;
  AdamOracle oracle;
  std::vector<double> theta{0.0};
  double want = 0.0;
  Rng rng(3);
  for (int t = 1; t <= 50; ++t) {
    const double g = rng.next_uniform(-2, 2);
    want = oracle.step(want, g, t, cfg);
    adam_update(theta, {g}, slot, t, cfg);
    CHECK(std::abs(theta[0] - want) <= 1e-12);
  }

  // first step from zero state: direction -lr * g / (|g| + eps)
  AdamState::Slot fresh;
  std::vector<double> x{0.0};
  adam_update(x, {1.0}, fresh, 1, cfg);
  CHECK(x[0] == doctest::Approx(-cfg.lr / (1.0 + cfg.adam_eps)).epsilon(1e-12));
}

TEST_CASE("zero gradients leave parameters untouched") {
  const ModelConfig mcfg = tiny_model_config();
  ModelParams params = ModelParams::init(mcfg, Rng(5));
  const ParamMap before = params.to_map();
  ParamMap zero_grads;
  params.for_each([&zero_grads](const std::string& name, const Tensor& t) {
    zero_grads.emplace(name, Tensor::zeros(t.shape()));
  });
  AdamState state;
  TrainConfig cfg;
  adam_step(params, zero_grads, state, cfg);
  const ParamMap after = params.to_map();
  for (const auto& [name, t] : before) CHECK(after.at(name).data() == t.data());
  CHECK(state.t == 1);

  zero_grads.erase(zero_grads.begin());
  CHECK_THROWS_AS(adam_step(params, zero_grads, state, cfg), ContractError);
}

TEST_CASE("constant gradient drives monotone movement against it") {
  TrainConfig cfg;
  cfg.lr = 1e-2;
  AdamState::Slot slot;
  std::vector<double> theta{1.0};
  double prev = theta[0];
  for (int t = 1; t <= 100; ++t) {
    adam_update(theta, {0.5}, slot, t, cfg);
    CHECK(theta[0] < prev);
    prev = theta[0];
  }
}

TEST_CASE("ce-only lambdas reduce fit to the cross-entropy objective") {
  const ModelConfig mcfg = tiny_model_config();
  const auto data = tiny_dataset(4, 18, mcfg, 3.0, 21);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.loss.lambda2 = 0.0;
  cfg.loss.lambda3 = 0.0;
  cfg.seed = 9;
  ModelParams params = ModelParams::init(mcfg, Rng(9));
  const FitResult r = fit(data, params, mcfg, cfg);
  REQUIRE(r.history.size() == 2);
  for (const EpochStats& e : r.history) {
    CHECK(e.hpcl == 0.0);
    CHECK(e.rank == 0.0);
    CHECK(e.total == e.ce);
    CHECK(std::isfinite(e.ce));
  }
}

TEST_CASE("training loss decreases on separable data") {
  const ModelConfig mcfg = tiny_model_config();
  const auto data = tiny_dataset(6, 18, mcfg, 4.0, 33);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.lr = 1e-3;
  cfg.seed = 7;
  ModelParams params = ModelParams::init(mcfg, Rng(7));
  const FitResult r = fit(data, params, mcfg, cfg);
  REQUIRE(r.history.size() == 5);
  for (std::size_t e = 1; e < r.history.size(); ++e) {
    CHECK(r.history[e].ce < r.history[e - 1].ce);
    CHECK(std::isfinite(r.history[e].total));
  }
}

TEST_CASE("same seed produces identical history and checkpoint bytes") {
  const ModelConfig mcfg = tiny_model_config();
  const auto data = tiny_dataset(4, 16, mcfg, 2.0, 55);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 1234;

  const auto run = [&](const fs::path& dir) {
    fs::remove_all(dir);
    ModelParams params = ModelParams::init(mcfg, Rng(cfg.seed));
    fit(data, params, mcfg, cfg, dir);
  };
  const fs::path d1 = fs::temp_directory_path() / "vhd_test_det1";
  const fs::path d2 = fs::temp_directory_path() / "vhd_test_det2";
  run(d1);
  run(d2);

  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>(std::istreambuf_iterator<char>(in),
                             std::istreambuf_iterator<char>());
  };
  CHECK(slurp(d1 / "model.chkp") == slurp(d2 / "model.chkp"));
  CHECK(slurp(d1 / "history.csv") == slurp(d2 / "history.csv"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("periodic checkpoints are written alongside the final one") {
  const ModelConfig mcfg = tiny_model_config();
  const auto data = tiny_dataset(3, 16, mcfg, 2.0, 61);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.checkpoint_every = 1;
  const fs::path dir = fs::temp_directory_path() / "vhd_test_ckpt_every";
  fs::remove_all(dir);
  ModelParams params = ModelParams::init(mcfg, Rng(4));
  fit(data, params, mcfg, cfg, dir);
  CHECK(fs::exists(dir / "model_epoch1.chkp"));
  CHECK(fs::exists(dir / "model_epoch2.chkp"));
  CHECK(fs::exists(dir / "model.chkp"));
  CHECK(!fs::exists(dir / "model_epoch3.chkp"));  // folded into the final file
  fs::remove_all(dir);
}

TEST_CASE("non-finite losses abort with epoch and video diagnostics") {
  const ModelConfig mcfg = tiny_model_config();
  auto data = tiny_dataset(2, 16, mcfg, 2.0, 83);
  for (double& x : data[0].visual.raw()) x = 1e200;  // overflows attention scores
  data[0].id = "hot";
  TrainConfig cfg;
  cfg.epochs = 1;
  ModelParams params = ModelParams::init(mcfg, Rng(6));
  CHECK_THROWS_WITH_AS(fit(data, params, mcfg, cfg), doctest::Contains("epoch 1"), CheckError);
}

TEST_CASE("single-class videos are skipped with a warning, not fatal") {
  const ModelConfig mcfg = tiny_model_config();
  auto data = tiny_dataset(3, 16, mcfg, 2.0, 77);
  VideoSequence flat = data[0];
  flat.id = "flat";
  for (auto& l : flat.labels) l = 1;
  data.push_back(flat);

  TrainConfig cfg;
  cfg.epochs = 1;
  ModelParams params = ModelParams::init(mcfg, Rng(2));
  const FitResult r = fit(data, params, mcfg, cfg);
  CHECK(r.skipped_videos == std::vector<std::string>{"flat"});
}

TEST_SUITE_END();
