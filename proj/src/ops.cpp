#include "vhd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace vhd {

namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
  }
}

bool any_on_tape(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts) {
    if (t->on_tape()) return true;
  }
  return false;
}

// C[m x n] += A[m x k] * B[k x n], row-major, ikj order.
void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A[m x k] * B[n x k]^T.
void gemm_nt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[k x n] += A[m x k]^T * B[m x n].
void gemm_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    const double* brow = b + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros({m, n});
  gemm_acc(a.data().data(), b.data().data(), out.raw().data(), m, k, n);

  if (any_on_tape({&a, &b})) {
    const std::int64_t pa = a.node(), pb = b.node();
    out.set_node(tape.push(
        {pa, pb}, out.numel(),
        [pa, pb, ad = a.data(), bd = b.data(), m, k, n](const std::vector<double>& up, Tape& t) {
          if (pa >= 0) {
            // dA = up * B^T
            gemm_nt_acc(up.data(), bd.data(), t.grad_buf(pa).data(), m, n, k);
          }
          if (pb >= 0) {
            // dB = A^T * up
            gemm_tn_acc(ad.data(), up.data(), t.grad_buf(pb).data(), m, k, n);
          }
        }));
  }
  return out;
}

Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: inner dimensions differ: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()) + "^T");
  }
  const int m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out = Tensor::zeros({m, n});
  gemm_nt_acc(a.data().data(), b.data().data(), out.raw().data(), m, k, n);

  if (any_on_tape({&a, &b})) {
    const std::int64_t pa = a.node(), pb = b.node();
    out.set_node(tape.push(
        {pa, pb}, out.numel(),
        [pa, pb, ad = a.data(), bd = b.data(), m, k, n](const std::vector<double>& up, Tape& t) {
          if (pa >= 0) {
            // dA = up * B
            gemm_acc(up.data(), bd.data(), t.grad_buf(pa).data(), m, n, k);
          }
          if (pb >= 0) {
            // dB = up^T * A
            gemm_tn_acc(up.data(), ad.data(), t.grad_buf(pb).data(), m, n, k);
          }
        }));
  }
  return out;
}

Tensor transpose(Tape& tape, const Tensor& m) {
  require_rank2(m, "transpose");
  const int r = m.rows(), c = m.cols();
  Tensor out = Tensor::zeros({c, r});
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) out(j, i) = m(i, j);
  }
  if (m.on_tape()) {
    const std::int64_t p = m.node();
    out.set_node(tape.push({p}, out.numel(), [p, r, c](const std::vector<double>& up, Tape& t) {
      auto& g = t.grad_buf(p);
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
          g[static_cast<std::size_t>(i) * c + j] += up[static_cast<std::size_t>(j) * r + i];
        }
      }
    }));
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  if (!same_shape(a, b)) {
    throw ShapeError("add: shape mismatch: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  Tensor out = a;
  out.set_node(-1);
  out.set_requires_grad(false);
  for (std::size_t i = 0; i < out.raw().size(); ++i) out.raw()[i] += b.data()[i];
  if (any_on_tape({&a, &b})) {
    const std::int64_t pa = a.node(), pb = b.node();
    out.set_node(tape.push({pa, pb}, out.numel(), [pa, pb](const std::vector<double>& up, Tape& t) {
      for (std::int64_t p : {pa, pb}) {
        if (p < 0) continue;
        auto& g = t.grad_buf(p);
        for (std::size_t i = 0; i < up.size(); ++i) g[i] += up[i];
      }
    }));
  }
  return out;
}

Tensor add_row_broadcast(Tape& tape, const Tensor& m, const Tensor& v) {
  require_rank2(m, "add_row_broadcast");
  if (v.rank() != 1 || v.dim(0) != m.cols()) {
    throw ShapeError("add_row_broadcast: vector " + shape_str(v.shape()) +
                     " does not match row width of " + shape_str(m.shape()));
  }
  const int r = m.rows(), c = m.cols();
  Tensor out = m;
  out.set_node(-1);
  out.set_requires_grad(false);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) out(i, j) += v(j);
  }
  if (any_on_tape({&m, &v})) {
    const std::int64_t pm = m.node(), pv = v.node();
    out.set_node(
        tape.push({pm, pv}, out.numel(), [pm, pv, r, c](const std::vector<double>& up, Tape& t) {
          if (pm >= 0) {
            auto& g = t.grad_buf(pm);
            for (std::size_t i = 0; i < up.size(); ++i) g[i] += up[i];
          }
          if (pv >= 0) {
            auto& g = t.grad_buf(pv);
            for (int i = 0; i < r; ++i) {
              for (int j = 0; j < c; ++j) g[j] += up[static_cast<std::size_t>(i) * c + j];
            }
          }
        }));
  }
  return out;
}

Tensor affine(Tape& tape, const Tensor& m, double mul_k, double add_k) {
  Tensor out = m;
  out.set_node(-1);
  out.set_requires_grad(false);
  for (double& x : out.raw()) x = mul_k * x + add_k;
  if (m.on_tape()) {
    const std::int64_t p = m.node();
    out.set_node(tape.push({p}, out.numel(), [p, mul_k](const std::vector<double>& up, Tape& t) {
      auto& g = t.grad_buf(p);
      for (std::size_t i = 0; i < up.size(); ++i) g[i] += mul_k * up[i];
    }));
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& m, double k) { return affine(tape, m, k, 0.0); }

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (!same_shape(a, b)) {
    throw ShapeError("mul: shape mismatch: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  Tensor out = a;
  out.set_node(-1);
  out.set_requires_grad(false);
  for (std::size_t i = 0; i < out.raw().size(); ++i) out.raw()[i] *= b.data()[i];
  if (any_on_tape({&a, &b})) {
    const std::int64_t pa = a.node(), pb = b.node();
    out.set_node(tape.push({pa, pb}, out.numel(),
                           [pa, pb, ad = a.data(), bd = b.data()](const std::vector<double>& up,
                                                                  Tape& t) {
                             if (pa >= 0) {
                               auto& g = t.grad_buf(pa);
                               for (std::size_t i = 0; i < up.size(); ++i) g[i] += up[i] * bd[i];
                             }
                             if (pb >= 0) {
                               auto& g = t.grad_buf(pb);
                               for (std::size_t i = 0; i < up.size(); ++i) g[i] += up[i] * ad[i];
                             }
                           }));
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& m) {
  Tensor out = m;
  out.set_node(-1);
  out.set_requires_grad(false);
  std::vector<std::uint8_t> mask(out.raw().size());
  for (std::size_t i = 0; i < out.raw().size(); ++i) {
    mask[i] = out.raw()[i] > 0.0;
    if (!mask[i]) out.raw()[i] = 0.0;
  }
  if (m.on_tape()) {
    const std::int64_t p = m.node();
    out.set_node(tape.push(
        {p}, out.numel(), [p, mask = std::move(mask)](const std::vector<double>& up, Tape& t) {
          auto& g = t.grad_buf(p);
          for (std::size_t i = 0; i < up.size(); ++i) {
            if (mask[i]) g[i] += up[i];
          }
        }));
  }
  return out;
}

Tensor softmax_rows(Tape& tape, const Tensor& m) {
  require_rank2(m, "softmax_rows");
  const int r = m.rows(), c = m.cols();
  Tensor out = Tensor::zeros({r, c});
  for (int i = 0; i < r; ++i) {
    double mx = m(i, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, m(i, j));
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
      const double e = std::exp(m(i, j) - mx);
      out(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < c; ++j) out(i, j) /= sum;
  }
  if (m.on_tape()) {
    const std::int64_t p = m.node();
    out.set_node(tape.push({p}, out.numel(),
                           [p, y = out.data(), r, c](const std::vector<double>& up, Tape& t) {
                             auto& g = t.grad_buf(p);
                             for (int i = 0; i < r; ++i) {
                               const std::size_t o = static_cast<std::size_t>(i) * c;
                               double dot = 0.0;
                               for (int j = 0; j < c; ++j) dot += up[o + j] * y[o + j];
                               for (int j = 0; j < c; ++j) g[o + j] += y[o + j] * (up[o + j] - dot);
                             }
                           }));
  }
  return out;
}

Tensor layer_norm(Tape& tape, const Tensor& m, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  require_rank2(m, "layer_norm");
  if (eps <= 0.0) throw ContractError("layer_norm: eps must be positive");
  const int r = m.rows(), c = m.cols();
  if (gamma.rank() != 1 || gamma.dim(0) != c || beta.rank() != 1 || beta.dim(0) != c) {
    throw ShapeError("layer_norm: gamma/beta must be length-" + std::to_string(c) + " vectors");
  }
  Tensor out = Tensor::zeros({r, c});
  std::vector<double> xhat(static_cast<std::size_t>(r) * c);
  std::vector<double> inv_std(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += m(i, j);
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      const double d = m(i, j) - mean;
      var += d * d;
    }
    var /= c;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(i)] = is;
    for (int j = 0; j < c; ++j) {
      const double xh = (m(i, j) - mean) * is;
      xhat[static_cast<std::size_t>(i) * c + j] = xh;
      out(i, j) = gamma(j) * xh + beta(j);
    }
  }
  if (any_on_tape({&m, &gamma, &beta})) {
    const std::int64_t pm = m.node(), pg = gamma.node(), pb = beta.node();
    out.set_node(tape.push(
        {pm, pg, pb}, out.numel(),
        [pm, pg, pb, xhat = std::move(xhat), inv_std = std::move(inv_std), gd = gamma.data(), r,
         c](const std::vector<double>& up, Tape& t) {
          if (pg >= 0) {
            auto& g = t.grad_buf(pg);
            for (int i = 0; i < r; ++i) {
              const std::size_t o = static_cast<std::size_t>(i) * c;
              for (int j = 0; j < c; ++j) g[j] += up[o + j] * xhat[o + j];
            }
          }
          if (pb >= 0) {
            auto& g = t.grad_buf(pb);
            for (int i = 0; i < r; ++i) {
              const std::size_t o = static_cast<std::size_t>(i) * c;
              for (int j = 0; j < c; ++j) g[j] += up[o + j];
            }
          }
          if (pm >= 0) {
            auto& g = t.grad_buf(pm);
            for (int i = 0; i < r; ++i) {
              const std::size_t o = static_cast<std::size_t>(i) * c;
              double mean_h = 0.0, mean_hx = 0.0;
              for (int j = 0; j < c; ++j) {
                const double h = up[o + j] * gd[j];
                mean_h += h;
                mean_hx += h * xhat[o + j];
              }
              mean_h /= c;
              mean_hx /= c;
              const double is = inv_std[static_cast<std::size_t>(i)];
              for (int j = 0; j < c; ++j) {
                const double h = up[o + j] * gd[j];
                g[o + j] += is * (h - mean_h - xhat[o + j] * mean_hx);
              }
            }
          }
        }));
  }
  return out;
}

Tensor l2_normalize_rows(Tape& tape, const Tensor& m) {
  require_rank2(m, "l2_normalize_rows");
  const int r = m.rows(), c = m.cols();
  Tensor out = Tensor::zeros({r, c});
  std::vector<double> inv_norm(static_cast<std::size_t>(r), 0.0);  // 0 marks a zero row
  for (int i = 0; i < r; ++i) {
    double ss = 0.0;
    for (int j = 0; j < c; ++j) ss += m(i, j) * m(i, j);
    if (ss == 0.0) continue;  // zero row passes through as zeros
    const double in = 1.0 / std::sqrt(ss);
    inv_norm[static_cast<std::size_t>(i)] = in;
    for (int j = 0; j < c; ++j) out(i, j) = m(i, j) * in;
  }
  if (m.on_tape()) {
    const std::int64_t p = m.node();
    out.set_node(tape.push(
        {p}, out.numel(),
        [p, y = out.data(), inv_norm = std::move(inv_norm), r, c](const std::vector<double>& up,
                                                                  Tape& t) {
          auto& g = t.grad_buf(p);
          for (int i = 0; i < r; ++i) {
            const std::size_t o = static_cast<std::size_t>(i) * c;
            const double in = inv_norm[static_cast<std::size_t>(i)];
            if (in == 0.0) {
              // zero row was passed through unchanged
              for (int j = 0; j < c; ++j) g[o + j] += up[o + j];
              continue;
            }
            double dot = 0.0;
            for (int j = 0; j < c; ++j) dot += up[o + j] * y[o + j];
            for (int j = 0; j < c; ++j) g[o + j] += in * (up[o + j] - y[o + j] * dot);
          }
        }));
  }
  return out;
}

Tensor seeded_dropout(Tape& tape, const Tensor& m, double p, Rng stream, bool training) {
  if (p < 0.0 || p >= 1.0) {
    throw ConfigError("seeded_dropout: p must be in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return m;
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor out = m;
  out.set_node(-1);
  out.set_requires_grad(false);
  std::vector<std::uint8_t> mask(out.raw().size());
  for (std::size_t i = 0; i < out.raw().size(); ++i) {
    mask[i] = stream.next_double() >= p;
    out.raw()[i] = mask[i] ? out.raw()[i] * keep_scale : 0.0;
  }
  if (m.on_tape()) {
    const std::int64_t pn = m.node();
    out.set_node(tape.push({pn}, out.numel(),
                           [pn, mask = std::move(mask), keep_scale](const std::vector<double>& up,
                                                                    Tape& t) {
                             auto& g = t.grad_buf(pn);
                             for (std::size_t i = 0; i < up.size(); ++i) {
                               if (mask[i]) g[i] += keep_scale * up[i];
                             }
                           }));
  }
  return out;
}

Tensor concat_cols(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const int r = parts[0].rows();
  int total = 0;
  for (const Tensor& t : parts) {
    require_rank2(t, "concat_cols");
    if (t.rows() != r) {
      throw ShapeError("concat_cols: row counts differ: " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(t.shape()));
    }
    total += t.cols();
  }
  Tensor out = Tensor::zeros({r, total});
  int off = 0;
  for (const Tensor& t : parts) {
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < t.cols(); ++j) out(i, off + j) = t(i, j);
    }
    off += t.cols();
  }
  bool taped = false;
  for (const Tensor& t : parts) taped = taped || t.on_tape();
  if (taped) {
    std::vector<std::int64_t> ps;
    std::vector<int> widths;
    for (const Tensor& t : parts) {
      ps.push_back(t.node());
      widths.push_back(t.cols());
    }
    out.set_node(tape.push(ps, out.numel(),
                           [ps, widths, r, total](const std::vector<double>& up, Tape& t) {
                             int off2 = 0;
                             for (std::size_t k = 0; k < ps.size(); ++k) {
                               const int w = widths[k];
                               if (ps[k] >= 0) {
                                 auto& g = t.grad_buf(ps[k]);
                                 for (int i = 0; i < r; ++i) {
                                   for (int j = 0; j < w; ++j) {
                                     g[static_cast<std::size_t>(i) * w + j] +=
                                         up[static_cast<std::size_t>(i) * total + off2 + j];
                                   }
                                 }
                               }
                               off2 += w;
                             }
                           }));
  }
  return out;
}

Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat_cols(tape, std::span<const Tensor>(parts, 2));
}

Tensor concat_rows(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank2(a, "concat_rows");
  require_rank2(b, "concat_rows");
  if (a.cols() != b.cols()) {
    throw ShapeError("concat_rows: column counts differ: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const int ra = a.rows(), rb = b.rows(), c = a.cols();
  Tensor out = Tensor::zeros({ra + rb, c});
  std::copy(a.data().begin(), a.data().end(), out.raw().begin());
  std::copy(b.data().begin(), b.data().end(), out.raw().begin() + a.numel());
  if (any_on_tape({&a, &b})) {
    const std::int64_t pa = a.node(), pb = b.node();
    const std::size_t na = static_cast<std::size_t>(a.numel());
    out.set_node(
        tape.push({pa, pb}, out.numel(), [pa, pb, na](const std::vector<double>& up, Tape& t) {
          if (pa >= 0) {
            auto& g = t.grad_buf(pa);
            for (std::size_t i = 0; i < na; ++i) g[i] += up[i];
          }
          if (pb >= 0) {
            auto& g = t.grad_buf(pb);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[na + i];
          }
        }));
  }
  return out;
}

Tensor slice_cols(Tape& tape, const Tensor& m, int c0, int c1) {
  require_rank2(m, "slice_cols");
  if (c0 < 0 || c1 > m.cols() || c0 >= c1) {
    throw ShapeError("slice_cols: invalid range [" + std::to_string(c0) + ", " +
                     std::to_string(c1) + ") for " + shape_str(m.shape()));
  }
  const int r = m.rows(), c = m.cols(), w = c1 - c0;
  Tensor out = Tensor::zeros({r, w});
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < w; ++j) out(i, j) = m(i, c0 + j);
  }
  if (m.on_tape()) {
    const std::int64_t p = m.node();
    out.set_node(
        tape.push({p}, out.numel(), [p, r, c, c0, w](const std::vector<double>& up, Tape& t) {
          auto& g = t.grad_buf(p);
          for (int i = 0; i < r; ++i) {
            for (int j = 0; j < w; ++j) {
              g[static_cast<std::size_t>(i) * c + c0 + j] +=
                  up[static_cast<std::size_t>(i) * w + j];
            }
          }
        }));
  }
  return out;
}

Tensor gather_rows(Tape& tape, const Tensor& m, const std::vector<int>& idx) {
  require_rank2(m, "gather_rows");
  const int r = m.rows(), c = m.cols();
  for (int i : idx) {
    if (i < 0 || i >= r) {
      throw ShapeError("gather_rows: index " + std::to_string(i) + " out of range for " +
                       shape_str(m.shape()));
    }
  }
  const int n = static_cast<int>(idx.size());
  Tensor out = Tensor::zeros({n, c});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c; ++j) out(i, j) = m(idx[static_cast<std::size_t>(i)], j);
  }
  if (m.on_tape()) {
    const std::int64_t p = m.node();
    out.set_node(tape.push({p}, out.numel(), [p, idx, c](const std::vector<double>& up, Tape& t) {
      auto& g = t.grad_buf(p);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (int j = 0; j < c; ++j) {
          g[static_cast<std::size_t>(idx[i]) * c + j] += up[i * c + j];
        }
      }
    }));
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& m, Shape shape) {
  if (shape_numel(shape) != m.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(m.shape()) + " as " + shape_str(shape));
  }
  Tensor out(std::move(shape), m.data());
  if (m.on_tape()) {
    const std::int64_t p = m.node();
    out.set_node(tape.push({p}, out.numel(), [p](const std::vector<double>& up, Tape& t) {
      auto& g = t.grad_buf(p);
      for (std::size_t i = 0; i < up.size(); ++i) g[i] += up[i];
    }));
  }
  return out;
}

Tensor sum_all(Tape& tape, const Tensor& m) {
  double s = 0.0;
  for (double x : m.data()) s += x;
  Tensor out = Tensor::scalar(s);
  if (m.on_tape()) {
    const std::int64_t p = m.node();
    out.set_node(tape.push({p}, 1, [p](const std::vector<double>& up, Tape& t) {
      auto& g = t.grad_buf(p);
      for (double& x : g) x += up[0];
    }));
  }
  return out;
}

Tensor row_sums(Tape& tape, const Tensor& m) {
  require_rank2(m, "row_sums");
  const int r = m.rows(), c = m.cols();
  Tensor out = Tensor::zeros({r});
  for (int i = 0; i < r; ++i) {
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += m(i, j);
    out(i) = s;
  }
  if (m.on_tape()) {
    const std::int64_t p = m.node();
    out.set_node(tape.push({p}, r, [p, r, c](const std::vector<double>& up, Tape& t) {
      auto& g = t.grad_buf(p);
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) g[static_cast<std::size_t>(i) * c + j] += up[static_cast<std::size_t>(i)];
      }
    }));
  }
  return out;
}

Tensor pair_distance(Tape& tape, const Tensor& m,
                     const std::vector<std::pair<int, int>>& pairs) {
  require_rank2(m, "pair_distance");
  const int r = m.rows(), c = m.cols();
  const int n = static_cast<int>(pairs.size());
  if (n == 0) throw ShapeError("pair_distance: empty pair list");
  for (const auto& [a, b] : pairs) {
    if (a < 0 || a >= r || b < 0 || b >= r) {
      throw ShapeError("pair_distance: pair (" + std::to_string(a) + ", " + std::to_string(b) +
                       ") out of range for " + shape_str(m.shape()));
    }
  }
  // eps keeps d > 0 so the backward stays finite; identical rows get zero
  // gradient through the diff terms.
  constexpr double kEps2 = 1e-24;
  Tensor out = Tensor::zeros({n});
  std::vector<double> diffs(static_cast<std::size_t>(n) * c);
  for (int i = 0; i < n; ++i) {
    double ss = 0.0;
    for (int j = 0; j < c; ++j) {
      const double d = m(pairs[static_cast<std::size_t>(i)].first, j) -
                       m(pairs[static_cast<std::size_t>(i)].second, j);
      diffs[static_cast<std::size_t>(i) * c + j] = d;
      ss += d * d;
    }
    out(i) = std::sqrt(ss + kEps2);
  }
  if (m.on_tape()) {
    const std::int64_t p = m.node();
    out.set_node(tape.push(
        {p}, n,
        [p, pairs, diffs = std::move(diffs), dist = out.data(), c](const std::vector<double>& up,
                                                                   Tape& t) {
          auto& g = t.grad_buf(p);
          for (std::size_t i = 0; i < pairs.size(); ++i) {
            const double w = up[i] / dist[i];
            for (int j = 0; j < c; ++j) {
              const double dd = w * diffs[i * c + j];
              g[static_cast<std::size_t>(pairs[i].first) * c + j] += dd;
              g[static_cast<std::size_t>(pairs[i].second) * c + j] -= dd;
            }
          }
        }));
  }
  return out;
}

Tensor bce_with_logits_mean(Tape& tape, const Tensor& logits,
                            const std::vector<std::uint8_t>& labels) {
  if (logits.rank() != 1) {
    throw ShapeError("bce_with_logits_mean: logits must be rank-1, got " +
                     shape_str(logits.shape()));
  }
  const int n = logits.dim(0);
  if (static_cast<int>(labels.size()) != n) {
    throw ShapeError("bce_with_logits_mean: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " logits");
  }
  for (std::uint8_t y : labels) {
    if (y > 1) throw DataError("bce_with_logits_mean: labels must be 0 or 1");
  }
  // bce(z, y) = softplus(z) - y*z, softplus in the overflow-safe form.
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = logits(i);
    const double sp = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    total += sp - static_cast<double>(labels[static_cast<std::size_t>(i)]) * z;
  }
  Tensor out = Tensor::scalar(total / n);
  if (logits.on_tape()) {
    const std::int64_t p = logits.node();
    out.set_node(tape.push({p}, 1,
                           [p, zd = logits.data(), labels, n](const std::vector<double>& up,
                                                              Tape& t) {
                             auto& g = t.grad_buf(p);
                             for (int i = 0; i < n; ++i) {
                               const double sig = 1.0 / (1.0 + std::exp(-zd[static_cast<std::size_t>(i)]));
                               g[static_cast<std::size_t>(i)] +=
                                   up[0] * (sig - labels[static_cast<std::size_t>(i)]) / n;
                             }
                           }));
  }
  return out;
}

Tensor sinusoidal_positional_encoding(int t, int d) {
  if (t < 1 || d < 1) throw ShapeError("positional encoding dims must be positive");
  Tensor pe = Tensor::zeros({t, d});
  for (int pos = 0; pos < t; ++pos) {
    for (int j = 0; j < d; j += 2) {
      const double rate = std::pow(10000.0, -static_cast<double>(j) / d);
      pe(pos, j) = std::sin(pos * rate);
      if (j + 1 < d) pe(pos, j + 1) = std::cos(pos * rate);
    }
  }
  return pe;
}

}  // namespace vhd
