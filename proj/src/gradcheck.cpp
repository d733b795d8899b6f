#include "vhd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vhd/rng.hpp"

namespace vhd {

namespace {

double eval_plain(const ScalarFn& f, const ParamMap& params) {
  Tape tape;
  const Tensor loss = f(tape, params);
  if (loss.numel() != 1) {
    throw ContractError("finite_diff_check: objective must be scalar, got " +
                        shape_str(loss.shape()));
  }
  return loss.value();
}

double rel_err(double a, double b, double floor) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

}  // namespace

FiniteDiffReport finite_diff_check(const ScalarFn& f, const ParamMap& params,
                                   const FiniteDiffOptions& opt) {
  if (opt.h <= 0.0) throw ContractError("finite_diff_check: h must be positive");

  // Determinism contract: two plain evaluations must agree bitwise.
  const double v1 = eval_plain(f, params);
  const double v2 = eval_plain(f, params);
  if (std::memcmp(&v1, &v2, sizeof(double)) != 0) {
    throw ContractError("finite_diff_check: objective is not deterministic (" +
                        std::to_string(v1) + " vs " + std::to_string(v2) + ")");
  }

  // Analytic gradients from one taped run.
  Tape tape;
  ParamMap bound;
  for (const auto& [name, t] : params) bound.emplace(name, tape.watch(t));
  const Tensor loss = f(tape, bound);
  if (loss.numel() != 1) {
    throw ContractError("finite_diff_check: objective must be scalar");
  }
  tape.backward(loss);
  std::map<std::string, Tensor> grads;
  for (const auto& [name, t] : bound) grads.emplace(name, tape.grad(t));

  if (opt.inject_grad_error != 0.0 && !grads.empty()) {
    for (double& g : grads.begin()->second.raw()) g += opt.inject_grad_error;
  }

  FiniteDiffReport report;
  report.tol = opt.tol;
  report.loss_value = loss.value();

  ParamMap work = params;
  Rng coord_rng(opt.coord_seed);
  std::size_t tensor_index = 0;
  for (auto& [name, t] : work) {
    const Tensor& g = grads.at(name);
    GroupReport group;
    group.name = name;

    std::vector<std::int64_t> coords;
    const std::int64_t n = t.numel();
    if (opt.max_coords_per_tensor <= 0 || n <= opt.max_coords_per_tensor) {
      coords.resize(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
    } else {
      Rng r = coord_rng.split(tensor_index);
      // sample distinct coordinates via partial shuffle
      std::vector<std::int64_t> all(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
      for (int k = 0; k < opt.max_coords_per_tensor; ++k) {
        const std::size_t j =
            k + static_cast<std::size_t>(r.next_below(static_cast<std::uint64_t>(n - k)));
        std::swap(all[static_cast<std::size_t>(k)], all[j]);
      }
      coords.assign(all.begin(), all.begin() + opt.max_coords_per_tensor);
    }

    for (std::int64_t c : coords) {
      double& slot = t.raw()[static_cast<std::size_t>(c)];
      const double saved = slot;
      slot = saved + opt.h;
      const double fp = eval_plain(f, work);
      slot = saved - opt.h;
      const double fm = eval_plain(f, work);
      slot = saved;
      const double numeric = (fp - fm) / (2.0 * opt.h);
      const double analytic = g.data()[static_cast<std::size_t>(c)];
      const double e = rel_err(analytic, numeric, opt.denom_floor);
      if (e > group.max_rel_err) {
        group.max_rel_err = e;
        group.worst_coord = c;
        group.worst_analytic = analytic;
        group.worst_numeric = numeric;
      }
      ++group.coords_checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
    report.groups.push_back(std::move(group));
    ++tensor_index;
  }
  report.pass = report.max_rel_err <= opt.tol;
  return report;
}

}  // namespace vhd
