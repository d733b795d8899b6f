#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vhd/model.hpp"
#include "vhd/training.hpp"

namespace vhd {

// Flat key-value view over the model, loss, sampler and trainer settings.
// Unknown keys are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  static RunConfig defaults() { return RunConfig{}; }

  // Loads the JSON file (when given), then applies "key=value" overrides in
  // order. Fusion weights are renormalized afterwards.
  static RunConfig load(const std::filesystem::path* file,
                        const std::vector<std::string>& overrides);

  void apply(const std::string& key, const std::string& value);

  std::string to_json_text(int indent = 2) const;
  void save(const std::filesystem::path& path) const;

  // Fills d_in_* from the manifest or cross-checks an explicit setting.
  void resolve_input_dims(int manifest_d_in_v, int manifest_d_in_a);
};

}  // namespace vhd
