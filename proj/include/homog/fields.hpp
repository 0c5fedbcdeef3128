#pragma once

#include <memory>
#include <vector>

#include "homog/material.hpp"
#include "homog/measure.hpp"

namespace homog {

enum class Rank { scalar = 1, vector = 3, matrix = 9 };

// Periodic amplitude u of the quasiperiodic field e_kappa u, stored as Fourier
// coefficients over [-N, N]^3. Vector fields are component-major; matrix
// entry (r, c) lives in block 3 r + c.
struct QuasiField {
  Vec3 kappa = Vec3::Zero();
  int N = 0;
  Rank rank = Rank::scalar;
  CVec coeffs;

  static QuasiField zeros(int N, Rank rank, const Vec3& kappa = Vec3::Zero());
  int width() const { return 2 * N + 1; }
  int block() const { return width() * width() * width(); }
  int components() const { return static_cast<int>(rank); }
  int index(int m1, int m2, int m3) const { return ((m1 + N) * width() + (m2 + N)) * width() + (m3 + N); }
  cd& at(int comp, int m1, int m2, int m3) { return coeffs[comp * block() + index(m1, m2, m3)]; }
  cd at(int comp, int m1, int m2, int m3) const { return coeffs[comp * block() + index(m1, m2, m3)]; }
  bool finite() const { return coeffs.allFinite(); }
};

// Reduce each component of kappa into [-pi, pi).
Vec3 reduce_kappa(const Vec3& kappa);

enum class DiffOp { grad, curl, div };

QuasiField apply_shifted_operator(DiffOp op, const QuasiField& u);
// Truncated Fourier convolution of A with a vector field, back to cutoff N.
QuasiField multiply_material(const MaterialField& a, const QuasiField& u);
// sum_{m,n} u^(m) conj(v^(n)) mu^(n - m), componentwise.
cd inner_product(const QuasiField& u, const QuasiField& v, const MomentTable& mu);

// Gram matrix <e_m, e_n>_mu = mu^(n - m) over [-N, N]^3 with a truncated eigenbasis.
class GramOperator {
 public:
  GramOperator(const MomentTable& mu, int N, double threshold = 1e-10);
  const Eigen::MatrixXcd& matrix() const { return G_; }
  const RVec& eigenvalues() const { return evals_; }
  const Eigen::MatrixXcd& eigenvectors() const { return evecs_; }
  int rank() const { return rank_; }
  int dimension() const { return static_cast<int>(G_.rows()); }
  double threshold() const { return threshold_; }
  double lambda_max() const { return evals_.size() ? evals_(evals_.size() - 1) : 0.0; }

 private:
  Eigen::MatrixXcd G_, evecs_;
  RVec evals_;
  int rank_ = 0;
  double threshold_;
};

// Per-node 3x3 coefficient values.
struct NodalMaterial {
  std::vector<Mat3> values;
  bool scalar = false;
  double lam_min = 0.0, lam_max = 0.0;
};

// Spectral space: trigonometric polynomials with per-axis integer frequencies
// `freqs` on the period cell [0, L)^3 (wavevector 2 pi K / L), together with a
// quadrature node set that integrates products of such polynomials exactly
// against the (L-periodically replicated) measure.
class Space {
 public:
  Space(const MeasureSpec& mu, int N, int P = 0, int NA = 1);
  Space(const MeasureSpec& mu, std::vector<int> freqs, int L, int P);

  static int default_nodes(int N, int NA) { return 2 * N + 2 * NA + 6; }

  const MeasureSpec& measure() const { return mu_; }
  int N() const { return N_; }
  int L() const { return L_; }
  int P() const { return P_; }
  int nf() const { return static_cast<int>(freqs_.size()); }
  int nc() const { return nf() * nf() * nf(); }
  int Q() const { return Q_; }
  const std::vector<int>& freqs() const { return freqs_; }
  const RVec& weights() const { return w_; }
  const std::vector<Vec3>& points() const { return pts_; }
  int zero_index() const { return zero_; }
  Eigen::Vector3i freq(int idx) const;
  // 2 pi K / L + kappa
  Vec3 wave(int idx, const Vec3& kappa) const;
  // Moment-based linear functional l(phi) = int phi dmu, as coefficients.
  const CVec& mean_functional() const { return ell_; }

  // Evaluate coefficients at nodes (ncomp components, component-major).
  CVec eval(const CVec& coeffs, int ncomp) const;
  // Weighted adjoint: b_m = <nodal, e_m>_mu per component.
  CVec test(const CVec& nodal, int ncomp) const;

  CVec grad(const CVec& phi, const Vec3& kappa) const;
  CVec curl(const CVec& u, const Vec3& kappa) const;
  CVec div(const CVec& u, const Vec3& kappa) const;
  // Adjoint of grad: -i k . v (coefficient space).
  CVec grad_adjoint(const CVec& v, const Vec3& kappa) const { return -div(v, kappa); }

  cd integrate(const CVec& nodal_scalar) const;
  CVec3 integrate3(const CVec& nodal_vector) const;
  CMat3 integrate_mat(const std::vector<Mat3>& m) const;
  cd inner(const CVec& a, const CVec& b) const;  // weighted, any number of components
  double norm(const CVec& a) const { return std::sqrt(std::max(0.0, inner(a, a).real())); }

  NodalMaterial material(const MaterialField& a) const;
  CVec apply(const NodalMaterial& m, const CVec& nodal_vector) const;
  CVec constant_nodal(const CVec3& c) const;

  // Coefficient index of frequency m in [-N, N]^3 for the standard cell space.
  int index(int m1, int m2, int m3) const;
  CVec to_nodal(const QuasiField& u) const;

 private:
  struct Block {
    std::array<int, 3> shape{};
    int offset = 0;
    double weight = 0.0;
    std::array<Eigen::MatrixXcd, 3> E;   // nodes x freqs
    std::array<Eigen::MatrixXcd, 3> EH;  // freqs x nodes
  };
  void build();

  MeasureSpec mu_;
  std::vector<int> freqs_;
  int N_ = 0, L_ = 1, P_ = 0, Q_ = 0, zero_ = -1;
  std::vector<Block> blocks_;
  RVec w_;
  std::vector<Vec3> pts_;
  CVec ell_;
};

// A and its pointwise functions at the nodes of one space.
struct Medium {
  NodalMaterial A, Ainv, Ahalf, Aminushalf;
  MaterialField field;
  static Medium build(const Space& s, const MaterialField& a);
  bool identity() const;
};

}  // namespace homog
