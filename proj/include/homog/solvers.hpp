#pragma once

#include <functional>

#include "homog/types.hpp"

namespace homog {

using LinOp = std::function<CVec(const CVec&)>;
using Dot = std::function<cd(const CVec&, const CVec&)>;

struct CgResult {
  int iterations = 0;
  double rel_residual = 0.0;
  double floor_rel = 0.0;
  bool converged = false;
};

struct CgOptions {
  double tol = 1e-13;
  int max_iter = 2000;
  // Residual at which a non-converged run is still accepted (stagnation at round-off).
  double accept = 1e-9;
  // Absolute residual below which the run counts as converged (round-off floor of the right-hand side).
  double abs_floor = 0.0;
};

// Preconditioned conjugate gradients for Hermitian positive semidefinite,
// consistent systems. `dot` defaults to the Euclidean product; x starts at zero.
CgResult pcg(const LinOp& A, const LinOp& precond, const CVec& b, CVec& x, const CgOptions& opt = {},
             const Dot& dot = {});

// Same, throwing SolverDiverged when the final residual exceeds opt.accept.
CgResult pcg_checked(const LinOp& A, const LinOp& precond, const CVec& b, CVec& x, const CgOptions& opt,
                     const char* what, const Dot& dot = {});

}  // namespace homog
