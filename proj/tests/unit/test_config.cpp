#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "vhd/errors.hpp"
#include "vhd/run_config.hpp"

using namespace vhd;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("config");

TEST_CASE("config defaults") {
  const RunConfig cfg = RunConfig::defaults();
  CHECK(cfg.model.d == 256);
  CHECK(cfg.model.d_k == 512);
  CHECK(cfg.model.d_v == 512);
  CHECK(cfg.model.n_layers == 2);
  CHECK(cfg.model.heads == 8);
  CHECK(cfg.model.dropout == 0.5);
  CHECK(cfg.model.positional_encoding == false);
  CHECK(cfg.train.lr == 1e-4);
  CHECK(cfg.train.epochs == 20);
  CHECK(cfg.train.loss.lambda1 == 1.0);
  CHECK(cfg.train.loss.lambda2 == 0.3);
  CHECK(cfg.train.loss.lambda3 == 0.1);
  CHECK(cfg.train.loss.margin == 0.7);
  CHECK(cfg.train.sampler.t == 20);
  CHECK(cfg.train.hard_pair_region == 3);
}

TEST_CASE("json file load, overrides and rejection of unknown keys") {
  const fs::path dir = fs::temp_directory_path() / "vhd_test_config";
  fs::create_directories(dir);
  const fs::path file = dir / "config.json";
  {
    std::ofstream out(file);
    out << R"({"d": 64, "heads": 4, "variant": "visual_only", "dropout": 0.25})";
  }
  const RunConfig cfg = RunConfig::load(&file, {"epochs=3", "lambda2=0.5", "variant=full"});
  CHECK(cfg.model.d == 64);
  CHECK(cfg.model.heads == 4);
  CHECK(cfg.model.dropout == 0.25);
  CHECK(cfg.model.variant == Variant::kFull);  // override wins
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.train.loss.lambda2 == 0.5);

  {
    std::ofstream out(file);
    out << R"({"d": 64, "nonsense_key": 1})";
  }
  CHECK_THROWS_WITH_AS(RunConfig::load(&file, {}), doctest::Contains("unknown config key"),
                       ConfigError);

  {
    std::ofstream out(file);
    out << R"({"d": "many"})";
  }
  CHECK_THROWS_AS(RunConfig::load(&file, {}), ConfigError);

  RunConfig cfg2;
  CHECK_THROWS_AS(cfg2.apply("definitely_not_a_key", "1"), ConfigError);
  CHECK_THROWS_AS(RunConfig::load(nullptr, {"epochs"}), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("config json round trip") {
  RunConfig cfg;
  cfg.model.d = 48;
  cfg.model.variant = Variant::kConcatAV;
  cfg.train.loss.tau = 0.2;
  cfg.train.seed = 99;
  const fs::path dir = fs::temp_directory_path() / "vhd_test_config_rt";
  fs::create_directories(dir);
  cfg.save(dir / "c.json");
  const fs::path file = dir / "c.json";
  const RunConfig back = RunConfig::load(&file, {});
  CHECK(back.model.d == 48);
  CHECK(back.model.variant == Variant::kConcatAV);
  CHECK(back.train.loss.tau == 0.2);
  CHECK(back.train.seed == 99);
  fs::remove_all(dir);
}

TEST_CASE("fusion weights are renormalized on load") {
  const RunConfig cfg = RunConfig::load(nullptr, {"fusion_w1=2", "fusion_w2=1", "fusion_w3=1"});
  CHECK(cfg.model.fusion_weights[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(cfg.model.fusion_weights[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(RunConfig::load(nullptr, {"fusion_w1=-1"}), ConfigError);
}

TEST_CASE("input dim resolution against a manifest") {
  RunConfig cfg;
  cfg.resolve_input_dims(32, 24);
  CHECK(cfg.model.d_in_visual == 32);
  CHECK(cfg.model.d_in_audio == 24);

  RunConfig pinned;
  pinned.model.d_in_visual = 16;
  CHECK_THROWS_WITH_AS(pinned.resolve_input_dims(32, 24), doctest::Contains("d_in_visual"),
                       ConfigError);
}

TEST_SUITE_END();
