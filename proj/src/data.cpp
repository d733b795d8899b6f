#include "vhd/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "vhd/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "feature io assumes a little-endian host");

namespace vhd {

namespace {

constexpr char kMagic[4] = {'V', 'H', 'L', 'F'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxDim = 1u << 24;

using json = nlohmann::json;

}  // namespace

void VideoSequence::validate() const {
  const int t = length();
  if (t == 0) throw DataError("video '" + id + "': empty sequence");
  if (visual.rank() != 2 || audio.rank() != 2 || visual.rows() != t || audio.rows() != t) {
    throw DataError("video '" + id + "': feature/label lengths disagree (visual " +
                    shape_str(visual.shape()) + ", audio " + shape_str(audio.shape()) + ", " +
                    std::to_string(t) + " labels)");
  }
  for (std::uint8_t l : labels) {
    if (l > 1) throw DataError("video '" + id + "': labels must be 0 or 1");
  }
}

void write_features(const VideoSequence& seq, const std::filesystem::path& path) {
  seq.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  const std::uint32_t t = static_cast<std::uint32_t>(seq.length());
  const std::uint32_t dv = static_cast<std::uint32_t>(seq.visual.cols());
  const std::uint32_t da = static_cast<std::uint32_t>(seq.audio.cols());
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), 4);
  out.write(reinterpret_cast<const char*>(&t), 4);
  out.write(reinterpret_cast<const char*>(&dv), 4);
  out.write(reinterpret_cast<const char*>(&da), 4);
  const auto write_f32 = [&out](const Tensor& m) {
    std::vector<float> row(m.data().size());
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>(m.data()[i]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  };
  write_f32(seq.visual);
  write_f32(seq.audio);
  out.write(reinterpret_cast<const char*>(seq.labels.data()),
            static_cast<std::streamsize>(seq.labels.size()));
  out.flush();
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

VideoSequence read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file '" + path.string() + "'");
  std::size_t offset = 0;
  const auto fail_truncated = [&](const char* what) -> void {
    throw DataError("feature file '" + path.string() + "': truncated reading " + what +
                    " at offset " + std::to_string(offset));
  };
  const auto read_bytes = [&](void* dst, std::size_t n, const char* what) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in) fail_truncated(what);
    offset += n;
  };
  char magic[4];
  read_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("feature file '" + path.string() + "': bad magic at offset 0");
  }
  std::uint32_t version = 0, t = 0, dv = 0, da = 0;
  read_bytes(&version, 4, "version");
  if (version != kVersion) {
    throw DataError("feature file '" + path.string() + "': unsupported version " +
                    std::to_string(version) + " at offset 4");
  }
  read_bytes(&t, 4, "segment count");
  read_bytes(&dv, 4, "visual dim");
  read_bytes(&da, 4, "audio dim");
  if (t == 0 || t > kMaxDim || dv == 0 || dv > kMaxDim || da == 0 || da > kMaxDim ||
      static_cast<std::uint64_t>(t) * dv > kMaxDim || static_cast<std::uint64_t>(t) * da > kMaxDim) {
    throw DataError("feature file '" + path.string() + "': dims out of range at offset 8 (T=" +
                    std::to_string(t) + ", d_v=" + std::to_string(dv) + ", d_a=" +
                    std::to_string(da) + ")");
  }
  const auto read_f32_matrix = [&](std::uint32_t rows, std::uint32_t cols, const char* what) {
    std::vector<float> buf(static_cast<std::size_t>(rows) * cols);
    read_bytes(buf.data(), buf.size() * sizeof(float), what);
    std::vector<double> data(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) data[i] = static_cast<double>(buf[i]);
    return Tensor({static_cast<int>(rows), static_cast<int>(cols)}, std::move(data));
  };
  VideoSequence seq;
  seq.visual = read_f32_matrix(t, dv, "visual payload");
  seq.audio = read_f32_matrix(t, da, "audio payload");
  seq.labels.resize(t);
  read_bytes(seq.labels.data(), t, "labels");
  for (std::size_t i = 0; i < seq.labels.size(); ++i) {
    if (seq.labels[i] > 1) {
      throw DataError("feature file '" + path.string() + "': label byte " + std::to_string(i) +
                      " is not 0/1 at offset " + std::to_string(offset - t + i));
    }
  }
  in.peek();
  if (!in.eof()) {
    throw DataError("feature file '" + path.string() + "': trailing bytes at offset " +
                    std::to_string(offset));
  }
  return seq;
}

std::vector<ManifestEntry> Manifest::split_entries(const std::string& split) const {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : entries) {
    if (e.split == split) out.push_back(e);
  }
  return out;
}

void Manifest::validate() const {
  if (entries.empty()) throw DataError("manifest '" + dataset + "' has no entries");
  for (const ManifestEntry& e : entries) {
    if (e.split != "train" && e.split != "test") {
      throw DataError("manifest entry '" + e.id + "': split must be train or test, got '" +
                      e.split + "'");
    }
    if (e.t_full < 1 || e.d_in_v < 1 || e.d_in_a < 1) {
      throw DataError("manifest entry '" + e.id + "': nonpositive dims");
    }
    if (e.d_in_v != entries.front().d_in_v || e.d_in_a != entries.front().d_in_a) {
      throw DataError("manifest entry '" + e.id + "': feature dims differ from the rest of the dataset");
    }
  }
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("manifest '" + path.string() + "': " + e.what());
  }
  Manifest m;
  try {
    m.dataset = j.at("dataset").get<std::string>();
    m.categories = j.at("categories").get<std::vector<std::string>>();
    for (const json& je : j.at("entries")) {
      ManifestEntry e;
      e.id = je.at("id").get<std::string>();
      e.category = je.at("category").get<std::string>();
      e.split = je.at("split").get<std::string>();
      e.path = je.at("path").get<std::string>();
      e.t_full = je.at("t_full").get<int>();
      e.d_in_v = je.at("d_in_v").get<int>();
      e.d_in_a = je.at("d_in_a").get<int>();
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DataError("manifest '" + path.string() + "': " + e.what());
  }
  m.validate();
  return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  json j;
  j["dataset"] = manifest.dataset;
  j["categories"] = manifest.categories;
  j["entries"] = json::array();
  for (const ManifestEntry& e : manifest.entries) {
    j["entries"].push_back({{"id", e.id},
                            {"category", e.category},
                            {"split", e.split},
                            {"path", e.path},
                            {"t_full", e.t_full},
                            {"d_in_v", e.d_in_v},
                            {"d_in_a", e.d_in_a}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << "\n";
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

VideoSequence load_entry(const ManifestEntry& entry, const std::filesystem::path& manifest_dir) {
  std::filesystem::path p(entry.path);
  if (p.is_relative()) p = manifest_dir / p;
  VideoSequence seq = read_features(p);
  seq.id = entry.id;
  seq.category = entry.category;
  if (seq.length() != entry.t_full || seq.visual.cols() != entry.d_in_v ||
      seq.audio.cols() != entry.d_in_a) {
    throw DataError("video '" + entry.id + "': manifest dims (T=" + std::to_string(entry.t_full) +
                    ", d_v=" + std::to_string(entry.d_in_v) + ", d_a=" +
                    std::to_string(entry.d_in_a) + ") do not match the feature file");
  }
  return seq;
}

void SamplerConfig::validate() const {
  if (t < 2) throw ConfigError("sampler config: t must be >= 2");
  if (min_fraction <= 0.0 || min_fraction > 0.5) {
    throw ConfigError("sampler config: min_fraction must be in (0, 0.5]");
  }
  const int lo = static_cast<int>(std::ceil(t * min_fraction));
  if (lo > t - lo) {
    throw ConfigError("sampler config: class bound " + std::to_string(lo) +
                      " is infeasible for t=" + std::to_string(t));
  }
}

namespace {

// k draws from pool; without replacement while possible, then uniform
// with-replacement top-up.
std::vector<int> draw_from_pool(const std::vector<int>& pool, int k, Rng& stream) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  if (k >= static_cast<int>(pool.size())) {
    out = pool;
    for (int i = static_cast<int>(pool.size()); i < k; ++i) {
      out.push_back(pool[static_cast<std::size_t>(stream.next_below(pool.size()))]);
    }
    return out;
  }
  std::vector<int> shuffled = pool;
  for (int i = 0; i < k; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) +
        static_cast<std::size_t>(stream.next_below(shuffled.size() - static_cast<std::size_t>(i)));
    std::swap(shuffled[static_cast<std::size_t>(i)], shuffled[j]);
    out.push_back(shuffled[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace

std::vector<int> sample_training_sequence(const VideoSequence& seq, const SamplerConfig& cfg,
                                          Rng& stream) {
  cfg.validate();
  seq.validate();
  std::vector<int> pos, neg;
  for (int i = 0; i < seq.length(); ++i) {
    (seq.labels[static_cast<std::size_t>(i)] ? pos : neg).push_back(i);
  }
  if (pos.empty() || neg.empty()) {
    throw SamplerError("video '" + seq.id + "': needs both positive and negative segments");
  }
  const int lo = static_cast<int>(std::ceil(cfg.t * cfg.min_fraction));
  const int hi = cfg.t - lo;
  const double share = static_cast<double>(pos.size()) / seq.length();
  int p = static_cast<int>(std::lround(share * cfg.t));
  p = std::clamp(p, lo, hi);

  std::vector<int> picked = draw_from_pool(pos, p, stream);
  const std::vector<int> negs = draw_from_pool(neg, cfg.t - p, stream);
  picked.insert(picked.end(), negs.begin(), negs.end());
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::pair<std::vector<double>, std::vector<std::uint8_t>> tvsum_segment_labels(
    const std::vector<double>& frame_scores, int frames_per_segment) {
  if (frame_scores.empty()) throw DataError("tvsum_segment_labels: no frame scores");
  if (frames_per_segment < 1) {
    throw ConfigError("tvsum_segment_labels: frames_per_segment must be >= 1");
  }
  std::vector<double> scores;
  for (std::size_t start = 0; start < frame_scores.size();
       start += static_cast<std::size_t>(frames_per_segment)) {
    const std::size_t end =
        std::min(start + static_cast<std::size_t>(frames_per_segment), frame_scores.size());
    double mean = 0.0;
    for (std::size_t i = start; i < end; ++i) mean += frame_scores[i];
    scores.push_back(mean / static_cast<double>(end - start));
  }
  const int s = static_cast<int>(scores.size());
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const double median = (s % 2 == 1)
                            ? sorted[static_cast<std::size_t>(s / 2)]
                            : 0.5 * (sorted[static_cast<std::size_t>(s / 2 - 1)] +
                                     sorted[static_cast<std::size_t>(s / 2)]);
  const int target = (s + 1) / 2;
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(s), 0);
  int positives = 0;
  for (int i = 0; i < s; ++i) {
    if (scores[static_cast<std::size_t>(i)] > median) {
      labels[static_cast<std::size_t>(i)] = 1;
      ++positives;
    }
  }
  for (int i = 0; i < s && positives < target; ++i) {
    if (labels[static_cast<std::size_t>(i)] == 0 &&
        scores[static_cast<std::size_t>(i)] == median) {
      labels[static_cast<std::size_t>(i)] = 1;
      ++positives;
    }
  }
  if (positives != target) {
    throw DataError("tvsum_segment_labels: could not reach " + std::to_string(target) +
                    " positives");
  }
  return {std::move(scores), std::move(labels)};
}

namespace {

// Values are squeezed through float32 so feature files round-trip bitwise.
double as_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

Tensor synth_modality(const std::vector<std::uint8_t>& labels, const std::vector<double>& mu_pos,
                      const std::vector<double>& mu_neg, double noise, Rng rng) {
  const int t = static_cast<int>(labels.size());
  const int d = static_cast<int>(mu_pos.size());
  Tensor out = Tensor::zeros({t, d});
  for (int i = 0; i < t; ++i) {
    const std::vector<double>& mu = labels[static_cast<std::size_t>(i)] ? mu_pos : mu_neg;
    for (int j = 0; j < d; ++j) {
      out(i, j) = as_f32(mu[static_cast<std::size_t>(j)] + noise * rng.next_gaussian());
    }
  }
  return out;
}

// Center pair at the requested separation: mu_neg standard normal, mu_pos
// shifted along a random unit direction.
std::pair<std::vector<double>, std::vector<double>> synth_centers(int d, double separation,
                                                                  Rng rng) {
  std::vector<double> mu_neg(static_cast<std::size_t>(d));
  for (double& x : mu_neg) x = rng.next_gaussian();
  std::vector<double> dir(static_cast<std::size_t>(d));
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& x : dir) x = rng.next_gaussian();
    norm = 0.0;
    for (double x : dir) norm += x * x;
    norm = std::sqrt(norm);
  }
  std::vector<double> mu_pos = mu_neg;
  for (int j = 0; j < d; ++j) {
    mu_pos[static_cast<std::size_t>(j)] += separation * dir[static_cast<std::size_t>(j)] / norm;
  }
  return {std::move(mu_pos), std::move(mu_neg)};
}

}  // namespace

Manifest synth_generate(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  if (cfg.train_videos < 1 || cfg.test_videos < 0) {
    throw ConfigError("synth: need at least one training video");
  }
  if (cfg.t_full < 4) throw ConfigError("synth: t_full must be >= 4");
  if (cfg.d_in_v < 1 || cfg.d_in_a < 1) throw ConfigError("synth: feature dims must be positive");
  if (cfg.separation < 0.0) throw ConfigError("synth: separation must be nonnegative");
  if (cfg.noise < 0.0) throw ConfigError("synth: noise must be nonnegative");

  std::filesystem::create_directories(out_dir / "features");
  Rng root(cfg.seed);
  const auto [mu_pos_v, mu_neg_v] = synth_centers(cfg.d_in_v, cfg.separation, root.split(1));
  const auto [mu_pos_a, mu_neg_a] = synth_centers(cfg.d_in_a, cfg.separation, root.split(2));

  Manifest manifest;
  manifest.dataset = cfg.dataset;
  manifest.categories = {cfg.category};

  const int total = cfg.train_videos + cfg.test_videos;
  for (int v = 0; v < total; ++v) {
    const bool is_train = v < cfg.train_videos;
    Rng vid_rng = root.split(100 + static_cast<std::uint64_t>(v));

    // contiguous highlight span covering 20..50% of the sequence
    const int min_len = std::max(1, static_cast<int>(std::ceil(0.2 * cfg.t_full)));
    const int max_len = std::max(min_len, static_cast<int>(std::floor(0.5 * cfg.t_full)));
    const int span = min_len + static_cast<int>(vid_rng.next_below(
                                   static_cast<std::uint64_t>(max_len - min_len + 1)));
    const int start =
        static_cast<int>(vid_rng.next_below(static_cast<std::uint64_t>(cfg.t_full - span + 1)));

    VideoSequence seq;
    const int index = is_train ? v : v - cfg.train_videos;
    std::string num = std::to_string(index);
    num.insert(0, num.size() < 3 ? 3 - num.size() : 0, '0');
    seq.id = (is_train ? "train_" : "test_") + num;
    seq.category = cfg.category;
    seq.labels.assign(static_cast<std::size_t>(cfg.t_full), 0);
    for (int i = start; i < start + span; ++i) seq.labels[static_cast<std::size_t>(i)] = 1;
    seq.visual = synth_modality(seq.labels, mu_pos_v, mu_neg_v, cfg.noise, vid_rng.split(0));
    seq.audio = synth_modality(seq.labels, mu_pos_a, mu_neg_a, cfg.noise, vid_rng.split(1));

    const std::string rel = "features/" + seq.id + ".vhlf";
    write_features(seq, out_dir / rel);

    ManifestEntry entry;
    entry.id = seq.id;
    entry.category = seq.category;
    entry.split = is_train ? "train" : "test";
    entry.path = rel;
    entry.t_full = cfg.t_full;
    entry.d_in_v = cfg.d_in_v;
    entry.d_in_a = cfg.d_in_a;
    manifest.entries.push_back(std::move(entry));
  }
  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace vhd
