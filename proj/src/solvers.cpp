#include "homog/solvers.hpp"

#include <cmath>
#include <string>

namespace homog {

CgResult pcg(const LinOp& A, const LinOp& precond, const CVec& b, CVec& x, const CgOptions& opt, const Dot& dot_in) {
  const Dot dot = dot_in ? dot_in : Dot([](const CVec& u, const CVec& v) { return v.dot(u); });
  auto nrm = [&](const CVec& v) { return std::sqrt(std::max(0.0, dot(v, v).real())); };
  CgResult res;
  x = CVec::Zero(b.size());
  const double bn = nrm(b);
  if (bn <= opt.abs_floor) {
    res.converged = true;
    return res;
  }
  CVec r = b;
  CVec z = precond ? precond(r) : r;
  CVec p = z;
  cd rz = dot(z, r);
  CVec best = x;
  double best_res = 1.0;
  int since_best = 0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    CVec Ap = A(p);
    const cd pAp = dot(Ap, p);
    if (std::abs(pAp) == 0.0 || !std::isfinite(pAp.real())) break;
    const cd alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    res.iterations = it;
    const double rel = nrm(r) / bn;
    const double floor_rel = opt.abs_floor / bn;
    if (rel < best_res) {
      best_res = rel;
      best = x;
      since_best = 0;
    } else if (++since_best > 50 && best_res < std::max(opt.accept, floor_rel)) {
      break;  // stagnated at round-off
    }
    if (rel < std::max(opt.tol, floor_rel)) break;
    z = precond ? precond(r) : r;
    const cd rz_new = dot(z, r);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  x = best;
  res.rel_residual = best_res;
  res.floor_rel = opt.abs_floor / bn;
  res.converged = best_res < std::max(opt.tol, res.floor_rel);
  return res;
}

CgResult pcg_checked(const LinOp& A, const LinOp& precond, const CVec& b, CVec& x, const CgOptions& opt,
                     const char* what, const Dot& dot) {
  CgResult r = pcg(A, precond, b, x, opt, dot);
  if (!(r.rel_residual <= std::max(opt.accept, r.floor_rel)))
    throw SolverDiverged(std::string(what) + ": residual " + std::to_string(r.rel_residual) + " after " +
                         std::to_string(r.iterations) + " iterations");
  return r;
}

}  // namespace homog
