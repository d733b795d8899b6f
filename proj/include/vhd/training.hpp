#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vhd/data.hpp"
#include "vhd/losses.hpp"
#include "vhd/model.hpp"

namespace vhd {

struct TrainConfig {
  double lr = 1e-4;
  int epochs = 20;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  LossConfig loss;
  SamplerConfig sampler;
  int checkpoint_every = 0;  // 0 = final checkpoint only
  int hard_pair_region = 3;

  void validate() const;
};

struct AdamState {
  struct Slot {
    std::vector<double> m;
    std::vector<double> v;
  };
  std::map<std::string, Slot> slots;
  std::int64_t t = 0;
};

// One bias-corrected Adam update on a raw buffer.
void adam_update(std::vector<double>& theta, const std::vector<double>& grad,
                 AdamState::Slot& slot, std::int64_t t, const TrainConfig& cfg);

// Applies one step over every named parameter. Gradient keys must cover the
// parameter set.
void adam_step(ModelParams& params, const ParamMap& grads, AdamState& state,
               const TrainConfig& cfg);

struct EpochStats {
  double ce = 0.0;
  double hpcl = 0.0;
  double rank = 0.0;
  double total = 0.0;
};

struct FitResult {
  std::vector<EpochStats> history;  // per-epoch means
  std::vector<std::string> skipped_videos;
};

void write_history(const std::vector<EpochStats>& history, const std::filesystem::path& path);

// Epoch loop: seeded shuffle, per-video subsequence sampling, forward in
// train mode, Eq.-style weighted loss, backward, Adam. Videos without both
// classes are excluded with a warning. Checkpoints go to checkpoint_dir
// when given (model.chkp, plus model_epochN.chkp every checkpoint_every).
FitResult fit(const std::vector<VideoSequence>& train_set, ModelParams& params,
              const ModelConfig& model_cfg, const TrainConfig& cfg,
              const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt);

}  // namespace vhd
