#pragma once

#include <cstdint>
#include <optional>

#include "homog/cell.hpp"

namespace homog {

// Shared, read-only data for all fibres of one medium: the coefficient fields at
// the nodes, the kappa = 0 cells and (general branch) the curl cell.
class FibreContext {
 public:
  FibreContext(const Space& s, const Medium& m, const MaterialField& Atilde, Branch branch, bool literal = false,
               CgOptions opt = {});

  const Space& space() const { return s_; }
  const Medium& medium() const { return m_; }
  const NodalMaterial& At() const { return At_; }
  const MaterialField& At_field() const { return At_field_; }
  Branch branch() const { return branch_; }
  bool literal() const { return literal_; }
  const CurlCell& curl_cell() const { return curl_; }
  const KappaCell& cell0() const { return *cell0_; }
  CMat3 A_tilde_hom() const;
  const CgOptions& options() const { return opt_; }

 private:
  const Space& s_;
  const Medium& m_;
  NodalMaterial At_;
  MaterialField At_field_;
  Branch branch_;
  bool literal_;
  CgOptions opt_;
  CurlCell curl_;
  std::optional<KappaCell> cell0_;
};

struct FibreProblem {
  double eps = 0.25;
  Vec3 theta = Vec3::Zero();
  CVec G;  // coefficients (3 nc), divergence-free at kappa
  Vec3 kappa() const { return eps * theta; }
  void validate(const Space& s) const;
};

// Gram-orthogonal removal of e_kappa-shifted gradients (all phi, constants included).
CVec project_div_free(const Space& s, const CVec& G_raw, const Vec3& kappa, CgOptions opt = {});
// max_m |<G, D e_m>| / (kmax |G|), D the shifted gradient.
double div_residual(const Space& s, const CVec& G, const Vec3& kappa);

// Band-limited random field (modes |m|_inf <= band), projected at kappa.
CVec random_current(const Space& s, std::uint64_t seed, const Vec3& kappa, int band = 1);
// Constant current c with the component along kappa removed.
CVec mean_current(const Space& s, const CVec3& c, const Vec3& kappa);

struct FibreSolution {
  CVec u;  // coefficients of E = A^{1/2} D
  int iterations = 0;
  double rel_residual = 0.0;
};
// eps^-2 <At curl_kappa u, curl_kappa v> + <Ainv u, v> = -<G, v> for all v, on any space.
FibreSolution solve_resolvent(const Space& s, const NodalMaterial& Ainv, const NodalMaterial& At, double eps,
                              const Vec3& kappa, const CVec& G, CgOptions opt = {});
// Energy norm of u for the same operator.
double resolvent_energy(const Space& s, const NodalMaterial& Ainv, const NodalMaterial& At, double eps,
                        const Vec3& kappa, const CVec& u);
// Same problem on the cell, after validation.
FibreSolution solve_fibre(const FibreContext& ctx, const FibreProblem& p);

CVec3 fibre_d(const FibreContext& ctx, const KappaCell& cell, const FibreProblem& p);
// A^{-1/2}(D Psi + I) d, nodal.
CVec leading_term_D(const KappaCell& cell, const CVec3& d);
// B = -eps^-1 curl_kappa u, coefficients.
CVec recover_B(const FibreContext& ctx, const CVec& u, const FibreProblem& p);
// Nodal B approximation: -(curl N + I)(i theta x d) (literal formulas: +); N = 0 in the unit branch.
CVec approx_B(const FibreContext& ctx, const FibreProblem& p, const CVec3& d, const NCorrector* N);

// Right-hand side functional of the R problem as a tested coefficient vector h,
// <H, v> = v^H h for coefficients v of A^{1/2} phi.
struct HFunctional {
  CVec h;
  CVec wN;             // coefficients of A^{1/2} N (i theta x d); zero in the unit branch
  double phiw = 0.0;   // worst |<H, A^{-1/2} D phi>| / |G| over unit test fields
  double wk = 0.0;     // worst |<H, A^{-1/2}(D psi_c + c)>| / |G|
  double scale = 0.0;  // sum of the norms of the pieces of h
};
HFunctional assemble_H(const FibreContext& ctx, const KappaCell& cell, const FibreProblem& p, const CVec3& d,
                       const NCorrector* N, std::uint64_t seed = 7);

struct ResidualCorrector {
  CVec u;  // coefficients of A^{1/2} R, gradient part removed
  double curl_norm = 0.0;  // |curl_kappa A^{1/2} R|
  int iterations = 0;
  HFunctional H;
};
// Throws PropertyViolation when either identity of H exceeds 1e-8 |G|.
ResidualCorrector residual_corrector(const FibreContext& ctx, const KappaCell& cell, const FibreProblem& p,
                                     const CVec3& d, const NCorrector* N);

struct FibreReport {
  double eps = 0.0;
  Vec3 theta = Vec3::Zero();
  Vec3 kappa = Vec3::Zero();
  CVec3 d = CVec3::Zero();
  double G_norm = 0.0, D_norm = 0.0;
  double err_D = 0.0, err_E = 0.0, err_B = 0.0, err_H = 0.0;
  double curlR_norm = 0.0, z_norm = 0.0;
  double H_phiw = 0.0, H_wk = 0.0;
  bool H_violation = false;
  double energy_defect = 0.0;   // relative
  double div_D = 0.0;           // weak div A^{-1} u residual / |G|
  double fibre_residual = 0.0;
  int iterations = 0;
  // Nodal fields, kept only when requested.
  CVec D, E, B, H, D_leading, E_leading, B_leading, H_leading;
};
FibreReport error_report(const FibreContext& ctx, const FibreProblem& p, bool keep_fields = false);

}  // namespace homog
