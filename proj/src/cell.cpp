#include "homog/cell.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace homog {

CVec cross_nodal(const CVec3& c, const CVec& F, int Q) {
  CVec out(3 * Q);
  out.segment(0, Q) = c(1) * F.segment(2 * Q, Q) - c(2) * F.segment(Q, Q);
  out.segment(Q, Q) = c(2) * F.segment(0, Q) - c(0) * F.segment(2 * Q, Q);
  out.segment(2 * Q, Q) = c(0) * F.segment(Q, Q) - c(1) * F.segment(0, Q);
  return out;
}

CVec flux_coeffs(const KappaCell& cell, int j) {
  const Space& s = cell.space();
  CVec f = s.grad(cell.psi(j), cell.kappa());
  f(j * s.nc() + s.zero_index()) += 1.0;
  return f;
}

VoigtReiss voigt_reiss(const CMat3& A_hat, const Medium& m, double tol) {
  VoigtReiss v;
  v.C1 = 1.0 / m.A.lam_max;
  v.C2 = 1.0 / m.A.lam_min;
  Eigen::SelfAdjointEigenSolver<CMat3> es(0.5 * (A_hat + A_hat.adjoint()), Eigen::EigenvaluesOnly);
  v.lam_min = es.eigenvalues()(0);
  v.lam_max = es.eigenvalues()(2);
  v.holds = v.lam_min >= v.C1 - tol && v.lam_max <= v.C2 + tol;
  return v;
}

EffectiveA effective_A(const KappaCell& cell) {
  EffectiveA e;
  e.value = cell.A_hat();
  e.asymmetry = cell.asymmetry();
  return e;
}

DualResult effective_A_dual(const Space& s, const Medium& m, const Vec3& kappa, CgOptions opt) {
  CgOptions inner = opt;
  GradientProjector P(s, kappa, nullptr, true, inner);
  const int Q = s.Q();
  auto Pi = [&](const CVec& x) -> CVec {
    const auto wc = P.solve_with_constants(x);
    return x - P.gradient_nodal(wc.phi) - s.constant_nodal(wc.c);
  };
  auto op = [&](const CVec& x) -> CVec { return Pi(s.apply(m.A, Pi(x))); };
  auto pre = [&](const CVec& r) -> CVec { return Pi(s.apply(m.Ainv, r)); };
  Dot dot = [&](const CVec& a, const CVec& b) { return s.inner(a, b); };
  DualResult out;
  CMat3 B;
  for (int j = 0; j < 3; ++j) {
    CVec3 e = CVec3::Zero();
    e(j) = 1.0;
    const CVec xi = s.constant_nodal(e);
    const CVec b = -Pi(s.apply(m.A, xi));
    CVec v;
    CgOptions o = opt;
    o.abs_floor = 1e-13 * m.A.lam_max;
    CgResult r = pcg_checked(op, pre, b, v, o, "dual tensor", dot);
    out.iterations += r.iterations;
    v = Pi(v);
    B.col(j) = s.integrate3(s.apply(m.A, v + xi));
    (void)Q;
  }
  out.A_hat_inverse = 0.5 * (B + B.adjoint());
  out.A_hat = out.A_hat_inverse.inverse();
  out.A_hat = 0.5 * (out.A_hat + out.A_hat.adjoint()).eval();
  return out;
}

// ------------------------------------------------------------ curl cell

namespace {

CVec curl_energy(const Space& s, const NodalMaterial& At, const CVec& u) {
  const Vec3 zero = Vec3::Zero();
  return s.curl(s.test(s.apply(At, s.eval(s.curl(u, zero), 3)), 3), zero);
}

}  // namespace

CurlCell zero_curl_cell(const Space& s) {
  CurlCell c;
  for (int j = 0; j < 3; ++j) c.u[j] = CVec::Zero(3 * s.nc());
  return c;
}

CurlCell solve_Ntilde(const Space& s, const Medium& m, const NodalMaterial& At, CgOptions opt) {
  const int n = s.nc();
  const Vec3 zero = Vec3::Zero();
  const Mat3 Abar = s.integrate_mat(At.values).real();
  const double alpha = Abar.trace() / 3.0;
  std::vector<CMat3> blocks(n);
  double kmax = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec3 k = s.wave(i, zero);
    kmax = std::max(kmax, k.norm());
    const Mat3 K = cross_matrix(k);
    Mat3 b = K.transpose() * Abar * K + alpha * k * k.transpose();
    if (k.norm() == 0.0) b = alpha * Mat3::Identity();
    blocks[i] = b.inverse().cast<cd>();
  }
  auto op = [&](const CVec& u) { return curl_energy(s, At, u); };
  auto pre = [&](const CVec& r) -> CVec {
    CVec z(3 * n);
    for (int i = 0; i < n; ++i) {
      const CVec3 ri(r(i), r(n + i), r(2 * n + i));
      const CVec3 zi = blocks[i] * ri;
      z(i) = zi(0);
      z(n + i) = zi(1);
      z(2 * n + i) = zi(2);
    }
    return z;
  };
  GradientProjector gauge(s, zero, &m.Ainv, true, opt);
  CurlCell out;
  for (int j = 0; j < 3; ++j) {
    CVec3 e = CVec3::Zero();
    e(j) = 1.0;
    const CVec E = s.constant_nodal(e);
    const CVec t = s.test(s.apply(At, E), 3);
    const CVec b = -s.curl(t, zero);
    CgOptions o = opt;
    o.abs_floor = 1e-13 * kmax * std::sqrt(double(n)) * t.norm();
    CVec u;
    CgResult r = pcg_checked(op, pre, b, u, o, "curl cell problem");
    out.iterations += r.iterations;
    // Remove the curl-free part so that div A^{-1} u = 0 and int u = 0.
    const auto wc = gauge.solve_with_constants(s.eval(u, 3), false);
    u -= s.grad(wc.phi, zero);
    for (int c = 0; c < 3; ++c) u(c * n + s.zero_index()) -= wc.c(c);
    out.u[j] = u;
    out.A_tilde_hom_raw.col(j) = s.integrate3(s.apply(At, s.eval(s.curl(u, zero), 3) + E));
  }
  out.asymmetry = (out.A_tilde_hom_raw - out.A_tilde_hom_raw.adjoint()).norm();
  return out;
}

CurlCellChecks check_Ntilde(const Space& s, const Medium& m, const NodalMaterial& At, const CurlCell& c) {
  CurlCellChecks r;
  const Vec3 zero = Vec3::Zero();
  for (int j = 0; j < 3; ++j) {
    CVec3 e = CVec3::Zero();
    e(j) = 1.0;
    const CVec flux = s.eval(s.curl(c.u[j], zero), 3) + s.constant_nodal(e);
    const CVec res = s.curl(s.test(s.apply(At, flux), 3), zero);
    r.residual = std::max(r.residual, res.cwiseAbs().maxCoeff());
    const CVec U = s.eval(c.u[j], 3);
    CVec t = s.grad_adjoint(s.test(s.apply(m.Ainv, U), 3), zero);
    t -= t(s.zero_index()) * s.mean_functional().conjugate();
    r.divergence = std::max(r.divergence, t.cwiseAbs().maxCoeff());
    r.mean = std::max(r.mean, s.integrate3(U).norm());
  }
  return r;
}

// ---------------------------------------------------------------- a_theta

CVec NCorrector::apply(const CVec3& eta) const {
  CVec out = eta(0) * curl->u[0] + eta(1) * curl->u[1] + eta(2) * curl->u[2];
  const CVec3 x = a * eta;
  for (int k = 0; k < 3; ++k)
    if (x(k) != 0.0) out += x(k) * flux_coeffs(*cell0, k);
  return out;
}

NCorrector solve_a_theta(const Vec3& theta, const CurlCell& curl, const KappaCell& cell0, const NodalMaterial& At) {
  const Space& s = cell0.space();
  const int Q = s.Q();
  NCorrector N;
  N.theta = theta;
  N.curl = &curl;
  N.cell0 = &cell0;
  const double tn = theta.norm();
  if (tn == 0.0) return N;
  const Vec3 t = theta / tn;
  int ax = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(t(i)) < std::abs(t(ax))) ax = i;
  Vec3 e1 = t.cross(Vec3::Unit(ax)).normalized();
  Vec3 e2 = t.cross(e1);
  N.frame.col(0) = t;
  N.frame.col(1) = e1;
  N.frame.col(2) = e2;
  const CVec3 it = kI * theta.cast<cd>();
  const CMat3 Ith = cross_matrix(it);
  auto moment = [&](const CVec& F) -> CVec3 { return Ith * s.integrate3(s.apply(At, cross_nodal(it, F, Q))); };
  const Vec3 perp[2] = {e1, e2};
  Eigen::Matrix2cd M, R;
  for (int k = 0; k < 2; ++k) {
    CVec F = CVec::Zero(3 * Q);
    CVec G = CVec::Zero(3 * s.nc());
    for (int j = 0; j < 3; ++j) {
      F += perp[k](j) * cell0.flux(j);
      G += perp[k](j) * curl.u[j];
    }
    const CVec3 mf = moment(F), mg = moment(s.eval(G, 3));
    for (int l = 0; l < 2; ++l) {
      M(l, k) = perp[l].cast<cd>().dot(mf);
      R(l, k) = -perp[l].cast<cd>().dot(mg);
    }
  }
  const double scale = M.norm();
  if (!(scale > 0.0) || std::abs(M.determinant()) < 1e-12 * scale * scale)
    throw SingularProjection("a_theta system is degenerate");
  const Eigen::Matrix2cd X = M.partialPivLu().solve(R);
  N.a.setZero();
  for (int k = 0; k < 2; ++k)
    for (int l = 0; l < 2; ++l) N.a += X(k, l) * (perp[k] * perp[l].transpose()).cast<cd>();
  for (int l = 0; l < 2; ++l) {
    const CVec w = s.eval(N.apply(perp[l].cast<cd>()), 3);
    N.defect = std::max(N.defect, moment(w).norm());
  }
  return N;
}

CVec3 d_theta(const Vec3& theta, const CVec3& G_mean, const CMat3& A_hat, const CMat3& A_tilde_hom, Branch branch,
              bool literal) {
  const CMat3 Ainv = A_hat.inverse();
  const CMat3 Ith = cross_matrix(CVec3(kI * theta.cast<cd>()));
  const CMat3 At = branch == Branch::general ? A_tilde_hom : CMat3::Identity();
  if (!literal) {
    const CMat3 S = Ith * At * Ith * Ainv + CMat3::Identity();
    return -Ainv * S.fullPivLu().solve(G_mean);
  }
  if (branch == Branch::unit_permeability) {
    const CMat3 S = Ith * Ith * Ainv + CMat3::Identity();
    return Ainv * S.fullPivLu().solve(G_mean);
  }
  const CMat3 S = Ith * At * Ith * Ainv;
  Eigen::FullPivLU<CMat3> lu(S);
  lu.setThreshold(1e-12);
  if (lu.rank() < 3) throw SingularSymbol("i theta x A~hom i theta x (A^hom)^{-1} is not invertible");
  return -Ainv * lu.solve(G_mean);
}

}  // namespace homog
