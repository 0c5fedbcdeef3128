#include "homog/helmholtz.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>

namespace homog {

// ------------------------------------------------------- GradientProjector

GradientProjector::GradientProjector(const Space& s, const Vec3& kappa, const NodalMaterial* M, bool zero_mean,
                                     CgOptions opt)
    : s_(s), kappa_(kappa), M_(M), zero_mean_(zero_mean), opt_(opt) {
  const Mat3 Mbar = M_ ? Mat3(s_.integrate_mat(M_->values).real()) : Mat3(Mat3::Identity());
  const int n = s_.nc();
  // Diagonal of D^H W M D is k^T (int M dmu) k for every measure.
  precond_.resize(n);
  double dmax = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec3 k = s_.wave(i, kappa_);
    precond_(i) = k.dot(Mbar * k);
    dmax = std::max(dmax, precond_(i));
    kmax_ = std::max(kmax_, k.norm());
  }
  for (int i = 0; i < n; ++i) precond_(i) = std::max(precond_(i), 1e-8 * dmax);
}

CVec GradientProjector::project(const CVec& x) const {
  if (!zero_mean_) return x;
  CVec y = x;
  const cd mean = s_.mean_functional().transpose() * x;
  y(s_.zero_index()) -= mean;
  return y;
}

CVec GradientProjector::project_adjoint(const CVec& x) const {
  if (!zero_mean_) return x;
  return x - x(s_.zero_index()) * s_.mean_functional().conjugate();
}

CVec GradientProjector::apply(const CVec& x) const {
  CVec v = gradient_nodal(project(x));
  return project_adjoint(s_.grad_adjoint(s_.test(weight(v), 3), kappa_));
}

CVec GradientProjector::solve_tested(const CVec& rhs, double floor) const {
  CVec b = project_adjoint(rhs);
  CVec x;
  CgOptions opt = opt_;
  opt.abs_floor = std::max(opt.abs_floor, floor);
  auto A = [this](const CVec& v) { return apply(v); };
  auto P = [this](const CVec& r) -> CVec { return r.cwiseQuotient(precond_.cast<cd>()); };
  CgResult r = pcg_checked(A, P, b, x, opt, "gradient projection");
  iterations_ = r.iterations;
  return project(x);
}

CVec GradientProjector::solve(const CVec& F) const {
  const CVec t = s_.test(weight(F), 3);
  return solve_tested(s_.grad_adjoint(t, kappa_), 1e-13 * kmax_ * std::sqrt(double(s_.nc())) * t.norm());
}

void GradientProjector::ensure_constants() const {
  if (have_chi_) return;
  for (int j = 0; j < 3; ++j) {
    CVec3 e = CVec3::Zero();
    e(j) = 1.0;
    const CVec E = s_.constant_nodal(e);
    chi_[j] = solve(E);
    const CVec r = E - gradient_nodal(chi_[j]);
    T_.col(j) = s_.integrate3(weight(r));
    T_plain_.col(j) = s_.integrate3(r);
  }
  have_chi_ = true;
}

const CMat3& GradientProjector::constant_block() const {
  ensure_constants();
  return T_;
}

GradientProjector::WithConstants GradientProjector::solve_with_constants(const CVec& F, bool weighted_mean) const {
  ensure_constants();
  WithConstants out;
  CVec phiF = solve(F);
  const CVec r = F - gradient_nodal(phiF);
  const CVec3 rhs = s_.integrate3(weighted_mean ? weight(r) : r);
  // Singular when a constant is itself a gradient on the support (plane measures);
  // then the minimum-norm constant is used as long as the system stays consistent.
  const CMat3& T = weighted_mean ? T_ : T_plain_;
  Eigen::CompleteOrthogonalDecomposition<CMat3> cod(T);
  cod.setThreshold(1e-10);
  out.c = cod.solve(rhs);
  const double scale = std::max({T.norm(), rhs.norm(), 1e-300});
  if ((T * out.c - rhs).norm() > 1e-8 * scale)
    throw ConstraintInfeasible("constant block of the gradient projection is inconsistent");
  out.phi = phiF;
  for (int j = 0; j < 3; ++j) out.phi -= out.c(j) * chi_[j];
  return out;
}

// ---------------------------------------------------------------- KappaCell

KappaCell::KappaCell(const Space& s, const Medium& m, const Vec3& kappa, CgOptions opt)
    : s_(s), m_(m), kappa_(kappa), proj_(s, kappa, &m.Ainv, true, opt) {
  for (int j = 0; j < 3; ++j) {
    CVec3 e = CVec3::Zero();
    e(j) = 1.0;
    const CVec E = s_.constant_nodal(e);
    psi_[j] = proj_.solve(-E);
    flux_[j] = proj_.gradient_nodal(psi_[j]) + E;
    Ahat_.col(j) = s_.integrate3(s_.apply(m_.Ainv, flux_[j]));
  }
}

CVec KappaCell::leading_E(const CVec3& d) const {
  CVec out = CVec::Zero(3 * s_.Q());
  for (int j = 0; j < 3; ++j) out += d(j) * flux_[j];
  return out;
}

// ------------------------------------------------------------ decomposition

CVec solve_psi_c(const KappaCell& cell, const CVec3& c) {
  return cell.projector().solve(-cell.space().constant_nodal(c));
}

CVec solve_Phi_w(const KappaCell& cell, const CVec& w) {
  return cell.projector().solve(cell.space().apply(cell.medium().Ahalf, w));
}

CVec3 mean_constant(const Space& s, const Medium& m, const CVec& w) { return s.integrate3(s.apply(m.Ahalf, w)); }

HelmholtzParts decompose(const KappaCell& cell, const CVec& w) {
  const Space& s = cell.space();
  const Medium& m = cell.medium();
  HelmholtzParts p;
  p.Phi = solve_Phi_w(cell, w);
  p.grad_part = s.apply(m.Aminushalf, cell.projector().gradient_nodal(p.Phi));
  std::array<CVec, 3> k;
  for (int j = 0; j < 3; ++j) k[j] = s.apply(m.Aminushalf, cell.flux(j));
  CMat3 G;
  CVec3 b;
  for (int i = 0; i < 3; ++i) {
    b(i) = s.inner(w, k[i]);
    for (int j = 0; j < 3; ++j) G(i, j) = s.inner(k[j], k[i]);
  }
  // K loses a dimension when a constant is a gradient on the support.
  Eigen::CompleteOrthogonalDecomposition<CMat3> cod(G);
  cod.setThreshold(1e-10);
  p.c = cod.solve(b);
  p.psi_c = CVec::Zero(s.nc());
  p.k_part = CVec::Zero(3 * s.Q());
  for (int j = 0; j < 3; ++j) {
    p.psi_c += p.c(j) * cell.psi(j);
    p.k_part += p.c(j) * k[j];
  }
  p.solenoidal = w - p.k_part - p.grad_part;
  return p;
}

HelmholtzChecks check_decomposition(const KappaCell& cell, const CVec& w, const HelmholtzParts& p,
                                    bool with_idempotence) {
  const Space& s = cell.space();
  const Medium& m = cell.medium();
  HelmholtzChecks r;
  const double wn = std::max(s.norm(w), 1e-300);
  // Reassemble from the potentials with an independent psi_c solve.
  const CVec psi_c = solve_psi_c(cell, p.c);
  const CVec kp = s.apply(m.Aminushalf, cell.projector().gradient_nodal(psi_c) + s.constant_nodal(p.c));
  const CVec gp = s.apply(m.Aminushalf, cell.projector().gradient_nodal(p.Phi));
  r.reconstruction = s.norm(w - p.solenoidal - kp - gp) / wn;
  r.orthogonality = std::max({std::abs(s.inner(p.solenoidal, p.k_part)), std::abs(s.inner(p.solenoidal, p.grad_part)),
                              std::abs(s.inner(p.k_part, p.grad_part))}) /
                    (wn * wn);
  // <A^{-1/2} w~, D phi> for every zero-mean phi.
  CVec t = s.grad_adjoint(s.test(s.apply(m.Aminushalf, p.solenoidal), 3), cell.kappa());
  t -= t(s.zero_index()) * s.mean_functional().conjugate();
  r.solenoidality = t.cwiseAbs().maxCoeff() / wn;
  r.mean_A_half = mean_constant(s, m, p.solenoidal).norm() / wn;
  r.c_formula = (p.c - mean_constant(s, m, w)).norm() / wn;
  if (with_idempotence) {
    auto part_err = [&](const CVec& x, int which) {
      HelmholtzParts q = decompose(cell, x);
      const CVec* got[3] = {&q.solenoidal, &q.k_part, &q.grad_part};
      double e = 0.0;
      for (int i = 0; i < 3; ++i) {
        const CVec expect = (i == which) ? x : CVec::Zero(x.size());
        e = std::max(e, s.norm(*got[i] - expect) / wn);
      }
      return e;
    };
    r.idempotence = std::max({part_err(p.solenoidal, 0), part_err(p.k_part, 1), part_err(p.grad_part, 2)});
  }
  return r;
}

// ------------------------------------------------------------- Poincare

double curl_poincare_constant(const Space& s, const NodalMaterial* M, const Vec3& kappa) {
  const int n = s.nc(), dim = 3 * n;
  Eigen::MatrixXcd K(dim, dim), B(dim, dim);
  for (int i = 0; i < dim; ++i) {
    CVec e = CVec::Zero(dim);
    e(i) = 1.0;
    K.col(i) = s.curl(s.test(s.eval(s.curl(e, kappa), 3), 3), kappa);
    CVec v = s.eval(e, 3);
    B.col(i) = s.test(M ? s.apply(*M, v) : v, 3);
  }
  K = 0.5 * (K + K.adjoint()).eval();
  B = 0.5 * (B + B.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eb(B);
  const double cut = 1e-10 * eb.eigenvalues().maxCoeff();
  std::vector<int> keep, drop;
  for (int i = 0; i < dim; ++i) (eb.eigenvalues()(i) > cut ? keep : drop).push_back(i);
  const int r = static_cast<int>(keep.size()), z = static_cast<int>(drop.size());
  Eigen::MatrixXcd Vr(dim, r), V0(dim, z);
  RVec lam(r);
  for (int i = 0; i < r; ++i) {
    Vr.col(i) = eb.eigenvectors().col(keep[i]);
    lam(i) = eb.eigenvalues()(keep[i]);
  }
  for (int i = 0; i < z; ++i) V0.col(i) = eb.eigenvectors().col(drop[i]);
  // Curl energy of the class: minimize over the mu-null representatives.
  Eigen::MatrixXcd Krr = Vr.adjoint() * K * Vr;
  if (z > 0) {
    Eigen::MatrixXcd K0r = V0.adjoint() * K * Vr;
    Eigen::MatrixXcd K00 = V0.adjoint() * K * V0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> e0(K00);
    const double c0 = 1e-12 * std::max(1.0, e0.eigenvalues().cwiseAbs().maxCoeff());
    RVec inv = e0.eigenvalues().unaryExpr([c0](double x) { return x > c0 ? 1.0 / x : 0.0; });
    Krr -= K0r.adjoint() * e0.eigenvectors() * inv.asDiagonal() * e0.eigenvectors().adjoint() * K0r;
  }
  const RVec ls = lam.cwiseSqrt(), lis = ls.cwiseInverse();
  Eigen::MatrixXcd S = lis.asDiagonal() * Krr * lis.asDiagonal();
  // Constraints <M u, D phi> = 0 (zero-mean phi) and <M u, e_j> = 0, in B-orthonormal coordinates.
  Eigen::MatrixXcd C(n + 3, dim);
  C.setZero();
  const CVec& ell = s.mean_functional();
  const int z0 = s.zero_index();
  for (int m = 0; m < n; ++m) {
    const Vec3 k = s.wave(m, kappa);
    for (int j = 0; j < 3; ++j) C(m, j * n + m) += -kI * k(j);
  }
  // Left-multiply the gradient rows by P0^H = I - conj(l) e0^T.
  Eigen::MatrixXcd row0 = C.row(z0);
  for (int m = 0; m < n; ++m) C.row(m) -= std::conj(ell(m)) * row0;
  for (int j = 0; j < 3; ++j) C(n + j, j * n + z0) = 1.0;
  Eigen::MatrixXcd Cy = C * Vr * ls.asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(Cy.adjoint());
  qr.setThreshold(1e-10);
  const int rc = static_cast<int>(qr.rank());
  if (rc >= r) throw DegenerateSubspace("complement of gradients and constants is empty");
  Eigen::MatrixXcd Qf = qr.householderQ();
  Eigen::MatrixXcd Z = Qf.rightCols(r - rc);
  Eigen::MatrixXcd H = Z.adjoint() * S * Z;
  H = 0.5 * (H + H.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eh(H, Eigen::EigenvaluesOnly);
  const double lmin = eh.eigenvalues()(0);
  if (lmin <= 1e-12 * std::max(1.0, eh.eigenvalues().maxCoeff())) return std::numeric_limits<double>::infinity();
  return 1.0 / std::sqrt(lmin);
}

double grad_A_ratio(const MaterialField& a, int samples) {
  double worst = 0.0;
  for (int i = 0; i < samples; ++i)
    for (int j = 0; j < samples; ++j)
      for (int k = 0; k < samples; ++k) {
        const Vec3 y(double(i) / samples, double(j) / samples, double(k) / samples);
        const Vec3 row = a.at(y).inverse().transpose() * a.divergence_at(y);
        worst = std::max(worst, row.norm());
      }
  return worst;
}

PoincareDiagnostics estimate_poincare(const Space& s, const Medium& m, const Vec3& kappa) {
  PoincareDiagnostics d;
  d.kappa = kappa;
  d.N = s.N();
  d.C_estimate = curl_poincare_constant(s, &m.Ainv, kappa);
  d.C_P_curl = curl_poincare_constant(s, nullptr, kappa);
  d.grad_A_ratio = grad_A_ratio(m.field);
  return d;
}

}  // namespace homog
