#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vhd/data.hpp"

namespace vhd {

struct EvalReport {
  std::string protocol;  // "map" or "top5"
  double dataset_average = 0.0;
  std::map<std::string, double> category_map;
  std::map<std::string, double> video_ap;
};

// AP with descending-score ranking, ties broken by earlier index. Requires
// at least one positive label.
double average_precision(std::span<const double> scores,
                         std::span<const std::uint8_t> labels);

// AP restricted to the five highest-scored segments, normalized by
// min(P, 5) where P counts the positives in the whole video.
double top5_map(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct VideoScore {
  std::string id;
  std::string category;
  double ap = 0.0;
};

// Category means of per-video scores, dataset figure = unweighted mean of
// the category means.
EvalReport aggregate_report(const std::vector<VideoScore>& scores, const std::string& protocol);

// Per-video metric over the manifest's test split; labels come from the
// referenced feature files.
EvalReport map_report(const std::map<std::string, std::vector<double>>& predictions,
                      const Manifest& manifest, const std::filesystem::path& manifest_dir,
                      const std::string& protocol = "map");

void write_report(const EvalReport& report, const std::filesystem::path& path);

}  // namespace vhd
