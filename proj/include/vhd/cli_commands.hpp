#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vhd::cli {

struct SynthArgs {
  int videos = 50;
  int test_videos = 20;
  int segments = 40;
  int dv = 32;
  int da = 32;
  double sep = 4.0;
  double noise = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainArgs {
  std::string manifest;
  std::string config;  // empty = defaults
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

struct InferArgs {
  std::string manifest;
  std::string checkpoint;
  std::string config;  // empty = config.json next to the checkpoint
  std::string out;
  std::string protocol = "map";
};

struct GradcheckArgs {
  std::string config;  // empty = built-in toy dims
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  int sequence_length = 6;
  double tol = 1e-3;
  bool corrupt_gradient = false;  // fault-injection hook used by the tests
};

int cmd_synth(const SynthArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_eval(const InferArgs& args);
int cmd_predict(const InferArgs& args);
int cmd_embed(const InferArgs& args);
int cmd_gradcheck(const GradcheckArgs& args);

}  // namespace vhd::cli
