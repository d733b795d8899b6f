#pragma once

#include <functional>
#include <map>
#include <string>

#include "vhd/tape.hpp"
#include "vhd/tensor.hpp"

namespace vhd {

using ParamMap = std::map<std::string, Tensor>;
// Builds a scalar loss on the given tape from the given parameters. Must be
// deterministic; the checker evaluates it repeatedly.
using ScalarFn = std::function<Tensor(Tape&, const ParamMap&)>;

struct FiniteDiffOptions {
  double h = 1e-5;
  double tol = 1e-6;
  // Relative error denominator is floored at this value so that
  // finite-difference noise on near-zero gradients does not dominate.
  double denom_floor = 1e-6;
  // 0 checks every coordinate; otherwise a seeded random subset per tensor.
  int max_coords_per_tensor = 0;
  std::uint64_t coord_seed = 0;
  // Test hook: offset added to one analytic gradient entry before comparing.
  double inject_grad_error = 0.0;
};

struct GroupReport {
  std::string name;
  double max_rel_err = 0.0;
  std::int64_t coords_checked = 0;
  std::int64_t worst_coord = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct FiniteDiffReport {
  std::vector<GroupReport> groups;
  double max_rel_err = 0.0;
  double tol = 0.0;
  bool pass = false;
  double loss_value = 0.0;
};

// Central differences (f(p+h) - f(p-h)) / 2h per coordinate against the
// tape's reverse-mode gradients. Throws ContractError if two evaluations of
// f at the same point differ (non-deterministic objective).
FiniteDiffReport finite_diff_check(const ScalarFn& f, const ParamMap& params,
                                   const FiniteDiffOptions& opt);

}  // namespace vhd
