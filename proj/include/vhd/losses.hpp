#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vhd/hardpairs.hpp"
#include "vhd/tape.hpp"
#include "vhd/tensor.hpp"

namespace vhd {

struct LossConfig {
  double tau = 0.07;
  double margin = 0.7;
  double lambda1 = 1.0;   // segment cross-entropy
  double lambda2 = 0.3;   // segment-wise contrastive term
  double lambda3 = 0.1;   // hard-pair margin rank term
  bool normalize_embeddings = true;

  void validate() const;
};

// concat(f_hat_v + f_cooc_v, f_hat_a + f_cooc_a), shape {T, 2d}.
Tensor aggregate_embeddings(Tape& tape, const Tensor& f_hat_v, const Tensor& f_cooc_v,
                            const Tensor& f_hat_a, const Tensor& f_cooc_a);

// Segment-to-segment InfoNCE over one video: each segment in turn is the
// query, same-label segments (excluding self) are positive keys, the other
// class supplies the negatives. Queries without positive peers are skipped;
// returns 0 when every query is skipped.
Tensor hpcl_loss(Tape& tape, const Tensor& embeddings,
                 const std::vector<std::uint8_t>& labels, const LossConfig& cfg);

// Hinge on the Euclidean distance of each sampled hard pair:
// sum over pairs of max(margin - d, 0). Empty pair sets cost 0.
Tensor rank_loss(Tape& tape, const Tensor& embeddings, const HardPairSet& pairs,
                 const LossConfig& cfg);

// Mean sigmoid BCE per score vector, summed over the three heads.
Tensor ce_loss(Tape& tape, const Tensor& y_tilde, const Tensor& y_v, const Tensor& y_a,
               const std::vector<std::uint8_t>& labels);
// Variant-aware form: sums over whichever heads are active.
Tensor ce_loss(Tape& tape, std::span<const Tensor> logit_vectors,
               const std::vector<std::uint8_t>& labels);

// lambda1*ce + lambda2*hpcl + lambda3*rank.
Tensor total_loss(Tape& tape, const Tensor& ce, const Tensor& hpcl, const Tensor& rank,
                  const LossConfig& cfg);

}  // namespace vhd
