#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vhd/rng.hpp"
#include "vhd/tensor.hpp"

namespace vhd {

// Per-video pre-extracted segment features plus binary highlight labels.
struct VideoSequence {
  std::string id;
  std::string category;
  Tensor visual;                     // {T_full, d_in_v}
  Tensor audio;                      // {T_full, d_in_a}
  std::vector<std::uint8_t> labels;  // {0,1}^T_full

  int length() const { return static_cast<int>(labels.size()); }
  void validate() const;
};

struct ManifestEntry {
  std::string id;
  std::string category;
  std::string split;  // "train" or "test"
  std::string path;   // feature file, relative to the manifest or absolute
  int t_full = 0;
  int d_in_v = 0;
  int d_in_a = 0;
};

struct Manifest {
  std::string dataset;
  std::vector<std::string> categories;
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> split_entries(const std::string& split) const;
  void validate() const;
};

// Feature file: magic "VHLF", version u32 = 1, T u32, d_v u32, d_a u32,
// float32 visual rows, float32 audio rows, T label bytes. Little-endian.
void write_features(const VideoSequence& seq, const std::filesystem::path& path);
VideoSequence read_features(const std::filesystem::path& path);

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
// Resolves an entry's feature path against the manifest's directory and
// loads it with id/category attached.
VideoSequence load_entry(const ManifestEntry& entry, const std::filesystem::path& manifest_dir);

struct SamplerConfig {
  int t = 20;
  double min_fraction = 1.0 / 3.0;  // minimum share of either class

  void validate() const;
};

// Sorted index multiset of length cfg.t whose positive count p satisfies
// ceil(t * min_fraction) <= p <= t - ceil(t * min_fraction). Duplicates
// appear only when a class pool is too small. Throws SamplerError for
// single-class videos.
std::vector<int> sample_training_sequence(const VideoSequence& seq, const SamplerConfig& cfg,
                                          Rng& stream);

// Frame scores -> segment scores (mean per block, last block may be short)
// and binary labels: strictly-above-median segments are positive, ties at
// the median fill earlier-index-first until exactly ceil(S/2) positives.
std::pair<std::vector<double>, std::vector<std::uint8_t>> tvsum_segment_labels(
    const std::vector<double>& frame_scores, int frames_per_segment);

struct SynthConfig {
  int train_videos = 50;
  int test_videos = 20;
  int t_full = 40;
  int d_in_v = 32;
  int d_in_a = 32;
  double separation = 4.0;
  double noise = 1.0;
  std::uint64_t seed = 0;
  std::string dataset = "synthetic";
  std::string category = "synth";
};

// Writes per-video feature files plus manifest.json under out_dir and
// returns the manifest. Each video carries one contiguous highlight span
// covering 20..50% of its segments; class centers are shared across the
// dataset and sit `separation` apart per modality.
Manifest synth_generate(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace vhd
