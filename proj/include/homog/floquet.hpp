#pragma once

#include <json.hpp>
#include <vector>

#include "homog/fibre.hpp"

namespace homog {

// Fibre lattice of a supercell of M cells per axis, in cell units y = x / eps.
// Fibre f carries kappa_f = 2 pi j_f / M with j in [-floor(M/2), ceil(M/2)) per
// axis; supercell frequency M m + j holds cell coefficient m of fibre j.
class SupercellLattice {
 public:
  SupercellLattice(int M, int N);

  int M() const { return M_; }
  int N() const { return N_; }
  int size() const { return M_ * M_ * M_; }
  int nc_cell() const { return w_ * w_ * w_; }
  int nc_super() const { return size() * nc_cell(); }
  const std::vector<int>& residues() const { return res_; }
  Eigen::Vector3i residue(int f) const;
  Vec3 kappa(int f) const;
  Vec3 theta(int f, double eps) const { return kappa(f) / eps; }
  // Sorted supercell frequencies per axis.
  std::vector<int> supercell_freqs() const;
  // Supercell coefficient index of cell coefficient i in fibre f.
  int super_index(int f, int i) const { return perm_[static_cast<std::size_t>(f) * nc_cell() + i]; }
  // Supercell space over the measure replicated M times per axis, P nodes per cell and axis.
  Space supercell_space(const MeasureSpec& mu, int P) const;
  nlohmann::json manifest(double eps) const;

 private:
  int M_, N_, w_;
  std::vector<int> res_;
  std::vector<int> perm_;
};

struct SupercellField {
  int M = 2;
  int N = 0;
  double eps = 0.5;
  int ncomp = 3;
  CVec coeffs;  // supercell Fourier coefficients, component-major

  static SupercellField zeros(const SupercellLattice& lat, double eps, int ncomp = 3);
  void validate(const SupercellLattice& lat) const;
};

using FloquetFamily = std::vector<CVec>;

FloquetFamily floquet_forward(const SupercellLattice& lat, const SupercellField& u);
// Throws IncompleteFamily unless every lattice point carries an amplitude of the right size.
SupercellField floquet_inverse(const SupercellLattice& lat, const FloquetFamily& family, int ncomp, double eps);

// sqrt(sum_f |u_f|^2) in the cell measure; equals the averaged supercell norm.
double family_norm(const Space& cell, const FloquetFamily& family, int ncomp);

// Band-limited random supercell current, divergence-free fibre by fibre.
SupercellField supercell_current(const SupercellLattice& lat, const Space& cell, double eps, std::uint64_t seed,
                                 int band = 1);

struct DirectIntegralReport {
  int M = 0;
  double eps = 0.0;
  double discrepancy = 0.0;         // energy norm of the difference / energy norm of the monolithic solution
  double field_discrepancy = 0.0;   // same in |A^{-1/2} .|
  double parseval_defect = 0.0;
  double solution_norm = 0.0;
  int monolithic_iterations = 0;
  int fibre_iterations = 0;
};
// Solves the supercell resolvent problem at kappa = 0 directly and fibre by fibre.
DirectIntegralReport direct_integral_check(const FibreContext& ctx, const SupercellLattice& lat,
                                           const SupercellField& G);

struct HomogenisedAssembly {
  SupercellField exact_E, assembled_E, classical_E;
  double g_norm = 0.0, D_norm = 0.0;
  double err_D = 0.0, err_D_classical = 0.0;
  double err_B = 0.0, err_B_classical = 0.0;
  int active_fibres = 0;
};
// Fibrewise (A^hom_{eps theta})^{-1}(frak A_theta + I)^{-1} applied to the mean of each
// fibre current, modulated by the kappa corrector; classical_E uses kappa = 0 throughout.
HomogenisedAssembly assemble_homogenised(const FibreContext& ctx, const SupercellLattice& lat,
                                         const SupercellField& g);

// Symbol of the homogenised solution operator restricted to theta-transverse data.
CMat3 homogenised_symbol(const Vec3& theta, const CMat3& A_hat, const CMat3& A_tilde_hom);

struct TailSample {
  Vec3 theta = Vec3::Zero();
  double norm = 0.0;
};
struct TailReport {
  double eps = 0.0;
  double measured = 0.0;  // sup over the samples
  double bound = 0.0;     // C1^{-1} eps^2 / (C2^{-1} pi^2 + eps^2)
  double ratio = 0.0;
  std::vector<TailSample> samples;
};
// Injects theta with |theta|_inf >= pi / eps; the tensor is taken at the reduced eps theta.
TailReport tail_bound(const FibreContext& ctx, double eps);

}  // namespace homog
