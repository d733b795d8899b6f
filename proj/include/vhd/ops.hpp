#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "vhd/rng.hpp"
#include "vhd/tape.hpp"
#include "vhd/tensor.hpp"

// Differentiable primitives. Each op computes eagerly and, when any input is
// on the tape, records a node whose closure accumulates parent gradients.
namespace vhd {

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
// a * b^T without materializing the transpose.
Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& tape, const Tensor& m);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
// m[r x c] + v[c] broadcast over rows.
Tensor add_row_broadcast(Tape& tape, const Tensor& m, const Tensor& v);
// mul_k * m + add_k elementwise.
Tensor affine(Tape& tape, const Tensor& m, double mul_k, double add_k);
Tensor scale(Tape& tape, const Tensor& m, double k);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor relu(Tape& tape, const Tensor& m);

// Row-wise softmax with per-row max subtraction.
Tensor softmax_rows(Tape& tape, const Tensor& m);
// Row-wise standardization (population variance) followed by gamma/beta.
Tensor layer_norm(Tape& tape, const Tensor& m, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
// Rows scaled to unit L2 norm; zero rows pass through unchanged.
Tensor l2_normalize_rows(Tape& tape, const Tensor& m);

// Inverted dropout, mask fully determined by the stream. Identity when
// training is false.
Tensor seeded_dropout(Tape& tape, const Tensor& m, double p, Rng stream, bool training);

Tensor concat_cols(Tape& tape, std::span<const Tensor> parts);
Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b);
Tensor concat_rows(Tape& tape, const Tensor& a, const Tensor& b);
Tensor slice_cols(Tape& tape, const Tensor& m, int c0, int c1);
Tensor gather_rows(Tape& tape, const Tensor& m, const std::vector<int>& idx);
Tensor reshape(Tape& tape, const Tensor& m, Shape shape);

Tensor sum_all(Tape& tape, const Tensor& m);   // shape {1}
Tensor row_sums(Tape& tape, const Tensor& m);  // {rows}

// Euclidean distance between the paired rows of m. A tiny epsilon inside the
// sqrt keeps the gradient finite for identical rows (their gradient is 0).
Tensor pair_distance(Tape& tape, const Tensor& m,
                     const std::vector<std::pair<int, int>>& pairs);

// Mean binary cross-entropy with sigmoid applied to the logits, computed in
// the softplus form for stability.
Tensor bce_with_logits_mean(Tape& tape, const Tensor& logits,
                            const std::vector<std::uint8_t>& labels);

// Sinusoidal positional encodings, shape {t, d}. Not a tape op.
Tensor sinusoidal_positional_encoding(int t, int d);

}  // namespace vhd
