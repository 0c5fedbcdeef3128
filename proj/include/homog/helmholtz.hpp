#pragma once

#include <array>
#include <optional>

#include "homog/fields.hpp"
#include "homog/solvers.hpp"

namespace homog {

// M-weighted projection onto gradients: finds phi with
//   <M (D phi - F), D phi'>_mu = 0  for all admissible phi',
// where D = e_kappa-shifted gradient. With zero_mean the trial and test
// spaces are {phi : int phi dmu = 0}. M == nullptr means the identity.
class GradientProjector {
 public:
  GradientProjector(const Space& s, const Vec3& kappa, const NodalMaterial* M, bool zero_mean = true,
                    CgOptions opt = {});

  const Space& space() const { return s_; }
  const Vec3& kappa() const { return kappa_; }

  CVec solve(const CVec& F_nodal) const;
  // Same with an already tested right-hand side r = D^H W M F (coefficient space);
  // `floor` is the absolute residual reachable given round-off in r.
  CVec solve_tested(const CVec& rhs, double floor = 0.0) const;

  struct WithConstants {
    CVec phi;
    CVec3 c;
  };
  // Projection onto {D phi + c}: adds <M (F - D phi - c), e_j> = 0, or
  // int (F - D phi - c) = 0 when weighted_mean is false.
  WithConstants solve_with_constants(const CVec& F_nodal, bool weighted_mean = true) const;
  const CMat3& constant_block() const;

  CVec gradient_nodal(const CVec& phi) const { return s_.eval(s_.grad(phi, kappa_), 3); }
  CVec apply(const CVec& x) const;
  int iterations() const { return iterations_; }

 private:
  CVec project(const CVec& x) const;
  CVec project_adjoint(const CVec& x) const;
  CVec weight(const CVec& nodal) const { return M_ ? s_.apply(*M_, nodal) : nodal; }
  void ensure_constants() const;

  const Space& s_;
  Vec3 kappa_;
  const NodalMaterial* M_;
  bool zero_mean_;
  CgOptions opt_;
  RVec precond_;
  double kmax_ = 0.0;
  mutable int iterations_ = 0;
  mutable bool have_chi_ = false;
  mutable std::array<CVec, 3> chi_;
  mutable CMat3 T_, T_plain_;
};

// Corrector basis at one quasimomentum: psi_{e_j} and the fluxes D psi_j + e_j.
class KappaCell {
 public:
  KappaCell(const Space& s, const Medium& m, const Vec3& kappa, CgOptions opt = {});

  const Space& space() const { return s_; }
  const Medium& medium() const { return m_; }
  const Vec3& kappa() const { return kappa_; }
  const GradientProjector& projector() const { return proj_; }
  const CVec& psi(int j) const { return psi_[j]; }
  // Nodal D psi_j + e_j.
  const CVec& flux(int j) const { return flux_[j]; }
  // int A^{-1}(D Psi + I), before symmetrization.
  const CMat3& A_hat_raw() const { return Ahat_; }
  CMat3 A_hat() const { return 0.5 * (Ahat_ + Ahat_.adjoint()); }
  double asymmetry() const { return (Ahat_ - Ahat_.adjoint()).norm(); }
  // Nodal (D Psi + I) d.
  CVec leading_E(const CVec3& d) const;

 private:
  const Space& s_;
  const Medium& m_;
  Vec3 kappa_;
  GradientProjector proj_;
  std::array<CVec, 3> psi_, flux_;
  CMat3 Ahat_;
};

struct HelmholtzParts {
  CVec solenoidal;    // w~ (nodal)
  CVec psi_c;         // coefficients
  CVec3 c = CVec3::Zero();
  CVec Phi;           // coefficients
  CVec k_part;        // A^{-1/2}(D psi_c + c) (nodal)
  CVec grad_part;     // A^{-1/2} D Phi (nodal)
};

CVec solve_psi_c(const KappaCell& cell, const CVec3& c);
CVec solve_Phi_w(const KappaCell& cell, const CVec& w_nodal);
CVec3 mean_constant(const Space& s, const Medium& m, const CVec& w_nodal);
// Orthogonal decomposition into K^perp-solenoidal, K and gradient parts.
HelmholtzParts decompose(const KappaCell& cell, const CVec& w_nodal);

struct HelmholtzChecks {
  double reconstruction = 0.0;
  double orthogonality = 0.0;
  double solenoidality = 0.0;
  double mean_A_half = 0.0;    // |int A^{1/2} w~|
  double c_formula = 0.0;      // |c - int A^{1/2} w|
  double idempotence = 0.0;
};
HelmholtzChecks check_decomposition(const KappaCell& cell, const CVec& w_nodal, const HelmholtzParts& parts,
                                    bool with_idempotence = true);

struct PoincareDiagnostics {
  Vec3 kappa = Vec3::Zero();
  int N = 0;
  double C_estimate = 0.0;
  double C_P_curl = 0.0;
  double grad_A_ratio = 0.0;
};

// 1 / smallest curl singular value on the M-orthogonal complement of
// {D phi + c}; dense, so the cell space should be small (N <= 4).
double curl_poincare_constant(const Space& s, const NodalMaterial* M, const Vec3& kappa);
double grad_A_ratio(const MaterialField& a, int samples = 48);
PoincareDiagnostics estimate_poincare(const Space& s, const Medium& m, const Vec3& kappa);

}  // namespace homog
