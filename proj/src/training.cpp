#include "vhd/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "vhd/checkpoint.hpp"
#include "vhd/hardpairs.hpp"
#include "vhd/ops.hpp"

namespace vhd {

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("train config: lr must be positive");
  if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("train config: betas must be in [0, 1)");
  }
  if (adam_eps <= 0.0) throw ConfigError("train config: adam_eps must be positive");
  if (checkpoint_every < 0) throw ConfigError("train config: checkpoint_every must be >= 0");
  if (hard_pair_region < 1) throw ConfigError("train config: hard_pair_region must be >= 1");
  loss.validate();
  sampler.validate();
}

void adam_update(std::vector<double>& theta, const std::vector<double>& grad,
                 AdamState::Slot& slot, std::int64_t t, const TrainConfig& cfg) {
  if (grad.size() != theta.size()) {
    throw ContractError("adam_update: gradient size does not match parameter size");
  }
  if (slot.m.empty()) {
    slot.m.assign(theta.size(), 0.0);
    slot.v.assign(theta.size(), 0.0);
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * g;
    slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = slot.m[i] / bc1;
    const double v_hat = slot.v[i] / bc2;
    theta[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
  }
}

void adam_step(ModelParams& params, const ParamMap& grads, AdamState& state,
               const TrainConfig& cfg) {
  ++state.t;
  params.for_each([&](const std::string& name, Tensor& tensor) {
    const auto it = grads.find(name);
    if (it == grads.end()) {
      throw ContractError("adam_step: missing gradient for parameter '" + name + "'");
    }
    adam_update(tensor.raw(), it->second.data(), state.slots[name], state.t, cfg);
  });
}

void write_history(const std::vector<EpochStats>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << "epoch,ce,hpcl,rank,total\n";
  char line[256];
  for (std::size_t i = 0; i < history.size(); ++i) {
    const EpochStats& s = history[i];
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g\n", i + 1, s.ce, s.hpcl,
                  s.rank, s.total);
    out << line;
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

namespace {

Tensor gather_plain(const Tensor& m, const std::vector<int>& idx) {
  Tensor out = Tensor::zeros({static_cast<int>(idx.size()), m.cols()});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (int j = 0; j < m.cols(); ++j) out(static_cast<int>(i), j) = m(idx[i], j);
  }
  return out;
}

void check_term(double value, const char* term, int epoch, const std::string& video_id) {
  if (!std::isfinite(value)) {
    throw CheckError("non-finite " + std::string(term) + " loss at epoch " +
                     std::to_string(epoch + 1) + ", video '" + video_id + "'");
  }
}

}  // namespace

FitResult fit(const std::vector<VideoSequence>& train_set, ModelParams& params,
              const ModelConfig& model_cfg, const TrainConfig& cfg,
              const std::optional<std::filesystem::path>& checkpoint_dir) {
  model_cfg.validate();
  cfg.validate();
  if (checkpoint_dir) std::filesystem::create_directories(*checkpoint_dir);

  FitResult result;
  std::vector<const VideoSequence*> usable;
  for (const VideoSequence& seq : train_set) {
    seq.validate();
    bool has_pos = false, has_neg = false;
    for (std::uint8_t l : seq.labels) (l ? has_pos : has_neg) = true;
    if (has_pos && has_neg) {
      usable.push_back(&seq);
    } else {
      std::cerr << "warning: excluding single-class video '" << seq.id << "' from training\n";
      result.skipped_videos.push_back(seq.id);
    }
  }
  if (usable.empty()) throw DataError("fit: no trainable videos (all single-class or empty)");

  AdamState adam;
  const Rng root(cfg.seed);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng epoch_rng = root.split(static_cast<std::uint64_t>(epoch) + 1);
    std::vector<const VideoSequence*> order = usable;
    epoch_rng.shuffle(order);

    EpochStats acc;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const VideoSequence& seq = *order[step];
      Rng video_rng = epoch_rng.split(1000 + step);
      Rng sampler_rng = video_rng.split(0);
      const std::vector<int> idx = sample_training_sequence(seq, cfg.sampler, sampler_rng);

      const Tensor v = gather_plain(seq.visual, idx);
      const Tensor a = gather_plain(seq.audio, idx);
      std::vector<std::uint8_t> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        labels[i] = seq.labels[static_cast<std::size_t>(idx[i])];
      }

      Tape tape;
      const ModelParams bound = bind_params(tape, params);
      const ModelOutput out =
          model_forward(tape, v, a, bound, model_cfg, Mode::kTrain, video_rng.split(1));

      std::vector<Tensor> active_logits;
      for (Head h : out.active) {
        switch (h) {
          case Head::kTilde: active_logits.push_back(out.y_tilde); break;
          case Head::kVisual: active_logits.push_back(out.y_v); break;
          case Head::kAudio: active_logits.push_back(out.y_a); break;
        }
      }
      const Tensor ce = ce_loss(tape, active_logits, labels);
      const Tensor hpcl = cfg.loss.lambda2 > 0.0 ? hpcl_loss(tape, out.f_hat, labels, cfg.loss)
                                                 : Tensor::scalar(0.0);
      const Tensor rank =
          cfg.loss.lambda3 > 0.0
              ? rank_loss(tape, out.f_hat, sample_hard_pairs(labels, cfg.hard_pair_region),
                          cfg.loss)
              : Tensor::scalar(0.0);
      const Tensor total = total_loss(tape, ce, hpcl, rank, cfg.loss);

      check_term(ce.value(), "ce", epoch, seq.id);
      check_term(hpcl.value(), "hpcl", epoch, seq.id);
      check_term(rank.value(), "rank", epoch, seq.id);
      check_term(total.value(), "total", epoch, seq.id);

      tape.backward(total);
      const ParamMap grads = collect_grads(tape, bound);
      adam_step(params, grads, adam, cfg);

      acc.ce += ce.value();
      acc.hpcl += hpcl.value();
      acc.rank += rank.value();
      acc.total += total.value();
    }
    const double n = static_cast<double>(order.size());
    result.history.push_back({acc.ce / n, acc.hpcl / n, acc.rank / n, acc.total / n});

    if (checkpoint_dir && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 &&
        epoch + 1 < cfg.epochs) {
      save_checkpoint(params.to_map(),
                      *checkpoint_dir / ("model_epoch" + std::to_string(epoch + 1) + ".chkp"));
    }
  }

  if (checkpoint_dir) {
    save_checkpoint(params.to_map(), *checkpoint_dir / "model.chkp");
    write_history(result.history, *checkpoint_dir / "history.csv");
  }
  return result;
}

}  // namespace vhd
