#include "vhd/eval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "vhd/errors.hpp"

namespace vhd {

namespace {

// Descending score, earlier index wins ties.
std::vector<int> ranking(std::span<const double> scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&scores](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  return order;
}

int count_positives(std::span<const std::uint8_t> labels) {
  int p = 0;
  for (std::uint8_t l : labels) {
    if (l > 1) throw DataError("average_precision: labels must be 0 or 1");
    p += l;
  }
  return p;
}

}  // namespace

double average_precision(std::span<const double> scores,
                         std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("average_precision: " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const int positives = count_positives(labels);
  if (positives == 0) {
    throw DataError("average_precision: undefined without a positive label");
  }
  const std::vector<int> order = ranking(scores);
  double sum = 0.0;
  int hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[static_cast<std::size_t>(order[rank])]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return sum / positives;
}

double top5_map(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("top5_map: " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (scores.size() < 5) {
    throw DataError("top5_map: needs at least 5 segments, got " + std::to_string(scores.size()));
  }
  const int positives = count_positives(labels);
  if (positives == 0) {
    throw DataError("top5_map: undefined without a positive label");
  }
  const std::vector<int> order = ranking(scores);
  double sum = 0.0;
  int hits = 0;
  for (std::size_t rank = 0; rank < 5; ++rank) {
    if (labels[static_cast<std::size_t>(order[rank])]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return sum / std::min(positives, 5);
}

EvalReport aggregate_report(const std::vector<VideoScore>& scores, const std::string& protocol) {
  if (scores.empty()) throw DataError("aggregate_report: no videos");
  EvalReport report;
  report.protocol = protocol;
  std::map<std::string, std::pair<double, int>> by_category;
  for (const VideoScore& v : scores) {
    report.video_ap[v.id] = v.ap;
    auto& [sum, count] = by_category[v.category];
    sum += v.ap;
    ++count;
  }
  double total = 0.0;
  for (const auto& [category, acc] : by_category) {
    const double mean = acc.first / acc.second;
    report.category_map[category] = mean;
    total += mean;
  }
  report.dataset_average = total / static_cast<double>(by_category.size());
  return report;
}

EvalReport map_report(const std::map<std::string, std::vector<double>>& predictions,
                      const Manifest& manifest, const std::filesystem::path& manifest_dir,
                      const std::string& protocol) {
  if (protocol != "map" && protocol != "top5") {
    throw ConfigError("map_report: unknown protocol '" + protocol + "'");
  }
  const std::vector<ManifestEntry> test = manifest.split_entries("test");
  if (test.empty()) throw DataError("map_report: manifest has no test videos");
  std::vector<VideoScore> scores;
  for (const ManifestEntry& entry : test) {
    const auto it = predictions.find(entry.id);
    if (it == predictions.end()) {
      throw DataError("map_report: missing predictions for video '" + entry.id + "'");
    }
    const VideoSequence seq = load_entry(entry, manifest_dir);
    if (static_cast<int>(it->second.size()) != seq.length()) {
      throw DataError("map_report: video '" + entry.id + "' has " +
                      std::to_string(it->second.size()) + " predictions for " +
                      std::to_string(seq.length()) + " segments");
    }
    VideoScore vs;
    vs.id = entry.id;
    vs.category = entry.category;
    vs.ap = protocol == "map" ? average_precision(it->second, seq.labels)
                              : top5_map(it->second, seq.labels);
    scores.push_back(std::move(vs));
  }
  return aggregate_report(scores, protocol);
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  nlohmann::json j;
  j["protocol"] = report.protocol;
  j["dataset_average"] = report.dataset_average;
  j["category_map"] = report.category_map;
  j["video_ap"] = report.video_ap;
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << "\n";
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace vhd
