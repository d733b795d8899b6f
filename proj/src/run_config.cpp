#include "vhd/run_config.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "vhd/errors.hpp"

namespace vhd {

namespace {

using json = nlohmann::json;

template <typename T>
T get_as(const json& v, const std::string& key);

template <>
bool get_as<bool>(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "' expects true or false");
  return v.get<bool>();
}

template <>
int get_as<int>(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' expects an integer");
  return v.get<int>();
}

template <>
std::uint64_t get_as<std::uint64_t>(const json& v, const std::string& key) {
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0)) {
    throw ConfigError("config key '" + key + "' expects a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

template <>
double get_as<double>(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' expects a number");
  return v.get<double>();
}

template <>
std::string get_as<std::string>(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' expects a string");
  return v.get<std::string>();
}

void apply_json(RunConfig& cfg, const std::string& key, const json& v) {
  ModelConfig& m = cfg.model;
  TrainConfig& t = cfg.train;
  if (key == "variant") m.variant = variant_from_name(get_as<std::string>(v, key));
  else if (key == "d") m.d = get_as<int>(v, key);
  else if (key == "d_k") m.d_k = get_as<int>(v, key);
  else if (key == "d_v") m.d_v = get_as<int>(v, key);
  else if (key == "n_layers") m.n_layers = get_as<int>(v, key);
  else if (key == "heads") m.heads = get_as<int>(v, key);
  else if (key == "dropout") m.dropout = get_as<double>(v, key);
  else if (key == "d_in_visual") m.d_in_visual = get_as<int>(v, key);
  else if (key == "d_in_audio") m.d_in_audio = get_as<int>(v, key);
  else if (key == "positional_encoding") m.positional_encoding = get_as<bool>(v, key);
  else if (key == "fusion_w1") m.fusion_weights[0] = get_as<double>(v, key);
  else if (key == "fusion_w2") m.fusion_weights[1] = get_as<double>(v, key);
  else if (key == "fusion_w3") m.fusion_weights[2] = get_as<double>(v, key);
  else if (key == "tau") t.loss.tau = get_as<double>(v, key);
  else if (key == "margin") t.loss.margin = get_as<double>(v, key);
  else if (key == "lambda1") t.loss.lambda1 = get_as<double>(v, key);
  else if (key == "lambda2") t.loss.lambda2 = get_as<double>(v, key);
  else if (key == "lambda3") t.loss.lambda3 = get_as<double>(v, key);
  else if (key == "normalize_embeddings") t.loss.normalize_embeddings = get_as<bool>(v, key);
  else if (key == "sample_t") t.sampler.t = get_as<int>(v, key);
  else if (key == "min_fraction") t.sampler.min_fraction = get_as<double>(v, key);
  else if (key == "lr") t.lr = get_as<double>(v, key);
  else if (key == "epochs") t.epochs = get_as<int>(v, key);
  else if (key == "beta1") t.beta1 = get_as<double>(v, key);
  else if (key == "beta2") t.beta2 = get_as<double>(v, key);
  else if (key == "adam_eps") t.adam_eps = get_as<double>(v, key);
  else if (key == "seed") t.seed = get_as<std::uint64_t>(v, key);
  else if (key == "checkpoint_every") t.checkpoint_every = get_as<int>(v, key);
  else if (key == "hard_pair_region") t.hard_pair_region = get_as<int>(v, key);
  else throw ConfigError("unknown config key '" + key + "'");
}

void normalize_fusion(RunConfig& cfg) {
  double sum = 0.0;
  for (double w : cfg.model.fusion_weights) {
    if (w < 0.0) throw ConfigError("fusion weights must be nonnegative");
    sum += w;
  }
  if (sum <= 0.0) throw ConfigError("fusion weights must not all be zero");
  for (double& w : cfg.model.fusion_weights) w /= sum;
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path* file,
                          const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config file '" + file->string() + "'");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError("config file '" + file->string() + "': " + e.what());
    }
    if (!j.is_object()) {
      throw ConfigError("config file '" + file->string() + "' must hold a flat JSON object");
    }
    for (const auto& [key, value] : j.items()) apply_json(cfg, key, value);
  }
  for (const std::string& override_kv : overrides) {
    const std::size_t eq = override_kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + override_kv + "' is not KEY=VALUE");
    }
    cfg.apply(override_kv.substr(0, eq), override_kv.substr(eq + 1));
  }
  normalize_fusion(cfg);
  return cfg;
}

void RunConfig::apply(const std::string& key, const std::string& value) {
  json v;
  try {
    v = json::parse(value);
  } catch (const json::exception&) {
    v = value;  // bare strings (e.g. variant names) need no quotes
  }
  if (v.is_object() || v.is_array()) {
    throw ConfigError("override for '" + key + "' must be a scalar");
  }
  apply_json(*this, key, v);
}

std::string RunConfig::to_json_text(int indent) const {
  json j;
  j["variant"] = variant_name(model.variant);
  j["d"] = model.d;
  j["d_k"] = model.d_k;
  j["d_v"] = model.d_v;
  j["n_layers"] = model.n_layers;
  j["heads"] = model.heads;
  j["dropout"] = model.dropout;
  j["d_in_visual"] = model.d_in_visual;
  j["d_in_audio"] = model.d_in_audio;
  j["positional_encoding"] = model.positional_encoding;
  j["fusion_w1"] = model.fusion_weights[0];
  j["fusion_w2"] = model.fusion_weights[1];
  j["fusion_w3"] = model.fusion_weights[2];
  j["tau"] = train.loss.tau;
  j["margin"] = train.loss.margin;
  j["lambda1"] = train.loss.lambda1;
  j["lambda2"] = train.loss.lambda2;
  j["lambda3"] = train.loss.lambda3;
  j["normalize_embeddings"] = train.loss.normalize_embeddings;
  j["sample_t"] = train.sampler.t;
  j["min_fraction"] = train.sampler.min_fraction;
  j["lr"] = train.lr;
  j["epochs"] = train.epochs;
  j["beta1"] = train.beta1;
  j["beta2"] = train.beta2;
  j["adam_eps"] = train.adam_eps;
  j["seed"] = train.seed;
  j["checkpoint_every"] = train.checkpoint_every;
  j["hard_pair_region"] = train.hard_pair_region;
  return j.dump(indent) + "\n";
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << to_json_text();
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void RunConfig::resolve_input_dims(int manifest_d_in_v, int manifest_d_in_a) {
  if (model.d_in_visual == 0) {
    model.d_in_visual = manifest_d_in_v;
  } else if (model.d_in_visual != manifest_d_in_v) {
    throw ConfigError("configured d_in_visual=" + std::to_string(model.d_in_visual) +
                      " does not match the manifest's " + std::to_string(manifest_d_in_v));
  }
  if (model.d_in_audio == 0) {
    model.d_in_audio = manifest_d_in_a;
  } else if (model.d_in_audio != manifest_d_in_a) {
    throw ConfigError("configured d_in_audio=" + std::to_string(model.d_in_audio) +
                      " does not match the manifest's " + std::to_string(manifest_d_in_a));
  }
}

}  // namespace vhd
