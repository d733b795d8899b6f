#include "vhd/losses.hpp"

#include <algorithm>
#include <cmath>

#include "vhd/ops.hpp"

namespace vhd {

void LossConfig::validate() const {
  if (tau <= 0.0) throw ConfigError("loss config: tau must be positive");
  if (margin < 0.0) throw ConfigError("loss config: margin must be nonnegative");
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) {
    throw ConfigError("loss config: lambdas must be nonnegative");
  }
}

Tensor aggregate_embeddings(Tape& tape, const Tensor& f_hat_v, const Tensor& f_cooc_v,
                            const Tensor& f_hat_a, const Tensor& f_cooc_a) {
  if (!same_shape(f_hat_v, f_cooc_v) || !same_shape(f_hat_a, f_cooc_a) ||
      !same_shape(f_hat_v, f_hat_a)) {
    throw ShapeError("aggregate_embeddings: all four inputs must share one shape, got " +
                     shape_str(f_hat_v.shape()) + ", " + shape_str(f_cooc_v.shape()) + ", " +
                     shape_str(f_hat_a.shape()) + ", " + shape_str(f_cooc_a.shape()));
  }
  return concat_cols(tape, add(tape, f_hat_v, f_cooc_v), add(tape, f_hat_a, f_cooc_a));
}

namespace {

// InfoNCE double sum over one embedding matrix with a hand-derived backward.
// Inputs are the (already normalized, if configured) rows.
Tensor hpcl_core(Tape& tape, const Tensor& x, const std::vector<std::uint8_t>& labels,
                 double tau) {
  const int t = x.rows(), d = x.cols();

  std::vector<std::vector<int>> positives(static_cast<std::size_t>(t));
  std::vector<std::vector<int>> negatives(static_cast<std::size_t>(t));
  int valid_queries = 0;
  for (int q = 0; q < t; ++q) {
    for (int j = 0; j < t; ++j) {
      if (j == q) continue;
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(q)]) {
        positives[static_cast<std::size_t>(q)].push_back(j);
      } else {
        negatives[static_cast<std::size_t>(q)].push_back(j);
      }
    }
    if (!positives[static_cast<std::size_t>(q)].empty()) ++valid_queries;
  }
  if (valid_queries == 0) return Tensor::scalar(0.0);

  const auto sim = [&](int i, int j) {
    double acc = 0.0;
    for (int k = 0; k < d; ++k) acc += x(i, k) * x(j, k);
    return acc / tau;
  };

  // loss and the coefficient each similarity s(q, j) receives in the gradient
  double loss = 0.0;
  std::vector<double> coeff(static_cast<std::size_t>(t) * t, 0.0);
  for (int q = 0; q < t; ++q) {
    const auto& pos = positives[static_cast<std::size_t>(q)];
    if (pos.empty()) continue;
    const auto& neg = negatives[static_cast<std::size_t>(q)];
    std::vector<double> neg_sims(neg.size());
    double max_neg = -HUGE_VAL;
    for (std::size_t i = 0; i < neg.size(); ++i) {
      neg_sims[i] = sim(q, neg[i]);
      max_neg = std::max(max_neg, neg_sims[i]);
    }
    const double w = 1.0 / (static_cast<double>(valid_queries) * static_cast<double>(pos.size()));
    for (int p : pos) {
      const double sp = sim(q, p);
      const double m = std::max(sp, max_neg);
      double z = std::exp(sp - m);
      const double ep = z;
      for (double sn : neg_sims) z += std::exp(sn - m);
      // -log(exp(sp) / (exp(sp) + sum exp(sn)))
      loss += w * (-sp + m + std::log(z));
      coeff[static_cast<std::size_t>(q) * t + p] += w * (ep / z - 1.0);
      for (std::size_t i = 0; i < neg.size(); ++i) {
        coeff[static_cast<std::size_t>(q) * t + neg[i]] +=
            w * (std::exp(neg_sims[i] - m) / z);
      }
    }
  }

  Tensor out = Tensor::scalar(loss);
  if (x.on_tape()) {
    const std::int64_t pn = x.node();
    out.set_node(tape.push(
        {pn}, 1,
        [pn, xd = x.data(), coeff = std::move(coeff), t, d, tau](const std::vector<double>& up,
                                                                 Tape& tp) {
          auto& g = tp.grad_buf(pn);
          const double u = up[0] / tau;
          for (int q = 0; q < t; ++q) {
            for (int j = 0; j < t; ++j) {
              const double cqj = coeff[static_cast<std::size_t>(q) * t + j];
              if (cqj == 0.0) continue;
              const double cu = cqj * u;
              // d s(q, j) / d x_q = x_j / tau and symmetrically for x_j
              for (int k = 0; k < d; ++k) {
                g[static_cast<std::size_t>(q) * d + k] += cu * xd[static_cast<std::size_t>(j) * d + k];
                g[static_cast<std::size_t>(j) * d + k] += cu * xd[static_cast<std::size_t>(q) * d + k];
              }
            }
          }
        }));
  }
  return out;
}

}  // namespace

Tensor hpcl_loss(Tape& tape, const Tensor& embeddings,
                 const std::vector<std::uint8_t>& labels, const LossConfig& cfg) {
  cfg.validate();
  if (embeddings.rank() != 2) {
    throw ShapeError("hpcl_loss: embeddings must be rank-2, got " +
                     shape_str(embeddings.shape()));
  }
  const int t = embeddings.rows();
  if (static_cast<int>(labels.size()) != t) {
    throw ShapeError("hpcl_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(t) + " segments");
  }
  if (t < 2) throw ContractError("hpcl_loss: need at least two segments");
  const Tensor x =
      cfg.normalize_embeddings ? l2_normalize_rows(tape, embeddings) : embeddings;
  return hpcl_core(tape, x, labels, cfg.tau);
}

Tensor rank_loss(Tape& tape, const Tensor& embeddings, const HardPairSet& pairs,
                 const LossConfig& cfg) {
  cfg.validate();
  if (pairs.pairs.empty()) return Tensor::scalar(0.0);
  const int t = embeddings.rows();
  for (const auto& [a, b] : pairs.pairs) {
    if (a < 0 || a >= t || b < 0 || b >= t) {
      throw ShapeError("rank_loss: pair index out of range for " +
                       shape_str(embeddings.shape()));
    }
  }
  const Tensor x =
      cfg.normalize_embeddings ? l2_normalize_rows(tape, embeddings) : embeddings;
  const Tensor dist = pair_distance(tape, x, pairs.pairs);
  const Tensor hinge = relu(tape, affine(tape, dist, -1.0, cfg.margin));
  return sum_all(tape, hinge);
}

Tensor ce_loss(Tape& tape, const Tensor& y_tilde, const Tensor& y_v, const Tensor& y_a,
               const std::vector<std::uint8_t>& labels) {
  const Tensor heads[] = {y_tilde, y_v, y_a};
  return ce_loss(tape, std::span<const Tensor>(heads, 3), labels);
}

Tensor ce_loss(Tape& tape, std::span<const Tensor> logit_vectors,
               const std::vector<std::uint8_t>& labels) {
  if (logit_vectors.empty()) throw ContractError("ce_loss: no score vectors");
  Tensor total = Tensor::scalar(0.0);
  for (const Tensor& logits : logit_vectors) {
    total = add(tape, total, bce_with_logits_mean(tape, logits, labels));
  }
  return total;
}

Tensor total_loss(Tape& tape, const Tensor& ce, const Tensor& hpcl, const Tensor& rank,
                  const LossConfig& cfg) {
  cfg.validate();
  const Tensor weighted_ce = scale(tape, ce, cfg.lambda1);
  const Tensor weighted_hpcl = scale(tape, hpcl, cfg.lambda2);
  const Tensor weighted_rank = scale(tape, rank, cfg.lambda3);
  return add(tape, add(tape, weighted_ce, weighted_hpcl), weighted_rank);
}

}  // namespace vhd
