#pragma once

#include "homog/helmholtz.hpp"

namespace homog {

// Nodal cross product c x F for a constant vector c.
CVec cross_nodal(const CVec3& c, const CVec& F, int Q);
// Coefficients of D psi_j + e_j.
CVec flux_coeffs(const KappaCell& cell, int j);

struct VoigtReiss {
  double C1 = 0.0, C2 = 0.0;         // 1/|A|_inf, |A^{-1}|_inf over the support nodes
  double lam_min = 0.0, lam_max = 0.0;
  bool holds = false;
};
VoigtReiss voigt_reiss(const CMat3& A_hat, const Medium& m, double tol = 1e-8);

// Effective tensor int A^{-1}(D Psi + I), symmetrized.
struct EffectiveA {
  CMat3 value = CMat3::Identity();
  double asymmetry = 0.0;
};
EffectiveA effective_A(const KappaCell& cell);

// Dual route: (A_hat)^{-1}_{ij} from minimizing int A (v + xi).(v + xi) over nodal
// fields v orthogonal to {D phi + c}; returns the inverse of that matrix.
struct DualResult {
  CMat3 A_hat_inverse = CMat3::Identity();
  CMat3 A_hat = CMat3::Identity();
  int iterations = 0;
};
DualResult effective_A_dual(const Space& s, const Medium& m, const Vec3& kappa, CgOptions opt = {});

// kappa = 0 curl cell problem. Columns u_j = A^{1/2} N~ e_j (coefficients) with
//   <At (curl u_j + e_j), curl v> = 0, div A^{-1} u_j = 0 weakly, int u_j = 0.
struct CurlCell {
  std::array<CVec, 3> u;
  CMat3 A_tilde_hom_raw = CMat3::Identity();
  double asymmetry = 0.0;
  int iterations = 0;
  CMat3 A_tilde_hom() const { return 0.5 * (A_tilde_hom_raw + A_tilde_hom_raw.adjoint()); }
};
CurlCell solve_Ntilde(const Space& s, const Medium& m, const NodalMaterial& At, CgOptions opt = {});
CurlCell zero_curl_cell(const Space& s);

struct CurlCellChecks {
  double residual = 0.0;     // max weak residual against all curl test fields
  double divergence = 0.0;   // max weak residual of div A^{-1} u against zero-mean phi
  double mean = 0.0;         // |int u|
};
CurlCellChecks check_Ntilde(const Space& s, const Medium& m, const NodalMaterial& At, const CurlCell& c);

// Corrector matrix N for one theta: A^{1/2} N eta = u eta + (D Psi0 + I) a eta.
struct NCorrector {
  Vec3 theta = Vec3::Zero();
  CMat3 a = CMat3::Zero();
  Mat3 frame = Mat3::Identity();  // columns theta/|theta|, e1perp, e2perp
  double defect = 0.0;            // |int i theta x At (i theta x A^{1/2} N eta)| worst over the frame
  const CurlCell* curl = nullptr;
  const KappaCell* cell0 = nullptr;
  // Coefficients of A^{1/2} N eta.
  CVec apply(const CVec3& eta) const;
};
NCorrector solve_a_theta(const Vec3& theta, const CurlCell& curl, const KappaCell& cell0, const NodalMaterial& At);

enum class Branch { unit_permeability, general };

// d = -A^{-1}(i theta x At i theta x A^{-1} + I)^{-1} int G by default. The literal
// variants follow the printed formulas: unit branch without the leading minus, general
// branch with the minus and without +I.
CVec3 d_theta(const Vec3& theta, const CVec3& G_mean, const CMat3& A_hat, const CMat3& A_tilde_hom, Branch branch,
              bool literal = false);

}  // namespace homog
