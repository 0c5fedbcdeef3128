#include "homog/fibre.hpp"

#include <Eigen/QR>
#include <cmath>
#include <random>

namespace homog {

namespace {

using Blocks = std::vector<CMat3>;

LinOp block_preconditioner(const Blocks& blocks, int n) {
  return [&blocks, n](const CVec& r) -> CVec {
    CVec z(3 * n);
    for (int i = 0; i < n; ++i) {
      const CVec3 zi = blocks[i] * CVec3(r(i), r(n + i), r(2 * n + i));
      z(i) = zi(0);
      z(n + i) = zi(1);
      z(2 * n + i) = zi(2);
    }
    return z;
  };
}

double kmax_of(const Space& s, const Vec3& kappa) {
  double k = 0.0;
  for (int i = 0; i < s.nc(); ++i) k = std::max(k, s.wave(i, kappa).norm());
  return std::max(k, 1.0);
}

// max_m |<M X, D e_m>| / (kmax |X|)
double weak_div(const Space& s, const NodalMaterial* M, const CVec& X, const Vec3& kappa, double scale) {
  const CVec t = s.grad_adjoint(s.test(M ? s.apply(*M, X) : X, 3), kappa);
  return t.cwiseAbs().maxCoeff() / (kmax_of(s, kappa) * std::max(scale, 1e-300));
}

CVec curl_energy(const Space& s, const NodalMaterial& At, const CVec& u, const Vec3& kappa) {
  return s.curl(s.test(s.apply(At, s.eval(s.curl(u, kappa), 3)), 3), kappa);
}

}  // namespace

// ------------------------------------------------------------------ context

FibreContext::FibreContext(const Space& s, const Medium& m, const MaterialField& Atilde, Branch branch, bool literal,
                           CgOptions opt)
    : s_(s), m_(m), branch_(branch), literal_(literal), opt_(opt) {
  if (branch_ == Branch::unit_permeability) {
    At_ = s_.material(At_field_);
    curl_ = zero_curl_cell(s_);
  } else {
    At_field_ = Atilde;
    At_ = s_.material(Atilde);
    curl_ = solve_Ntilde(s_, m_, At_, opt_);
  }
  cell0_.emplace(s_, m_, Vec3::Zero(), opt_);
}

CMat3 FibreContext::A_tilde_hom() const {
  return branch_ == Branch::general ? curl_.A_tilde_hom() : CMat3(CMat3::Identity());
}

void FibreProblem::validate(const Space& s) const {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidSpec("fibre problem needs eps > 0");
  const Vec3 k = kappa();
  for (int i = 0; i < 3; ++i)
    if (std::abs(k(i)) > kPi * (1.0 + 1e-12)) throw InvalidSpec("theta lies outside eps^-1 Q'");
  if (G.size() != 3 * s.nc()) throw RankMismatch("current has the wrong number of coefficients");
}

// ---------------------------------------------------------------- currents

CVec project_div_free(const Space& s, const CVec& G_raw, const Vec3& kappa, CgOptions opt) {
  GradientProjector P(s, kappa, nullptr, false, opt);
  const CVec phi = P.solve(s.eval(G_raw, 3));
  return G_raw - s.grad(phi, kappa);
}

double div_residual(const Space& s, const CVec& G, const Vec3& kappa) {
  const CVec X = s.eval(G, 3);
  return weak_div(s, nullptr, X, kappa, s.norm(X));
}

CVec random_current(const Space& s, std::uint64_t seed, const Vec3& kappa, int band) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const int n = s.nc();
  CVec G = CVec::Zero(3 * n);
  for (int i = 0; i < n; ++i) {
    if (s.freq(i).cwiseAbs().maxCoeff() > band) continue;
    for (int c = 0; c < 3; ++c) G(c * n + i) = cd(g(rng), g(rng));
  }
  return project_div_free(s, G, kappa);
}

CVec mean_current(const Space& s, const CVec3& c, const Vec3& kappa) {
  CVec3 v = c;
  if (kappa.norm() > 0.0) {
    const CVec3 t = (kappa / kappa.norm()).cast<cd>();
    v -= t * t.dot(c);
  }
  const int n = s.nc();
  CVec G = CVec::Zero(3 * n);
  for (int j = 0; j < 3; ++j) G(j * n + s.zero_index()) = v(j);
  return project_div_free(s, G, kappa);
}

// -------------------------------------------------------------- fibre solve

FibreSolution solve_resolvent(const Space& s, const NodalMaterial& Ainv, const NodalMaterial& At, double eps,
                              const Vec3& kappa, const CVec& G, CgOptions opt) {
  const int n = s.nc();
  const double ie2 = 1.0 / (eps * eps);
  const Mat3 Atbar = s.integrate_mat(At.values).real();
  const Mat3 Aibar = s.integrate_mat(Ainv.values).real();
  Blocks blocks(n);
  for (int i = 0; i < n; ++i) {
    const Mat3 K = cross_matrix(s.wave(i, kappa));
    blocks[i] = (ie2 * K.transpose() * Atbar * K + Aibar).inverse().cast<cd>();
  }
  auto op = [&](const CVec& u) -> CVec {
    return ie2 * curl_energy(s, At, u, kappa) + s.test(s.apply(Ainv, s.eval(u, 3)), 3);
  };
  const CVec b = -s.test(s.eval(G, 3), 3);
  FibreSolution out;
  opt.accept = std::min(opt.accept, 1e-10);
  if (b.norm() == 0.0) {
    out.u = CVec::Zero(3 * n);
    return out;
  }
  CgResult r = pcg_checked(op, block_preconditioner(blocks, n), b, out.u, opt, "fibre problem");
  out.iterations = r.iterations;
  out.rel_residual = r.rel_residual;
  return out;
}

double resolvent_energy(const Space& s, const NodalMaterial& Ainv, const NodalMaterial& At, double eps,
                        const Vec3& kappa, const CVec& u) {
  const CVec Au = curl_energy(s, At, u, kappa) / (eps * eps) + s.test(s.apply(Ainv, s.eval(u, 3)), 3);
  return std::sqrt(std::max(0.0, u.dot(Au).real()));
}

FibreSolution solve_fibre(const FibreContext& ctx, const FibreProblem& p) {
  p.validate(ctx.space());
  return solve_resolvent(ctx.space(), ctx.medium().Ainv, ctx.At(), p.eps, p.kappa(), p.G, ctx.options());
}

CVec3 fibre_d(const FibreContext& ctx, const KappaCell& cell, const FibreProblem& p) {
  const CVec3 G_mean = ctx.space().integrate3(ctx.space().eval(p.G, 3));
  return d_theta(p.theta, G_mean, cell.A_hat(), ctx.A_tilde_hom(), ctx.branch(), ctx.literal());
}

CVec leading_term_D(const KappaCell& cell, const CVec3& d) {
  return cell.space().apply(cell.medium().Aminushalf, cell.leading_E(d));
}

CVec recover_B(const FibreContext& ctx, const CVec& u, const FibreProblem& p) {
  return -(1.0 / p.eps) * ctx.space().curl(u, p.kappa());
}

CVec approx_B(const FibreContext& ctx, const FibreProblem& p, const CVec3& d, const NCorrector* N) {
  const Space& s = ctx.space();
  const CVec3 eta = cross_matrix(CVec3(kI * p.theta.cast<cd>())) * d;
  CVec out = s.constant_nodal(eta);
  if (N && ctx.branch() == Branch::general) {
    const CurlCell& c = ctx.curl_cell();
    const CVec u = eta(0) * c.u[0] + eta(1) * c.u[1] + eta(2) * c.u[2];
    out += s.eval(s.curl(u, Vec3::Zero()), 3);
  }
  return ctx.literal() ? out : CVec(-out);
}

// ---------------------------------------------------------------- H and R

HFunctional assemble_H(const FibreContext& ctx, const KappaCell& cell, const FibreProblem& p, const CVec3& d,
                       const NCorrector* N, std::uint64_t seed) {
  const Space& s = ctx.space();
  const Medium& m = ctx.medium();
  const Vec3 kappa = p.kappa();
  const int n = s.nc();
  const double ie = 1.0 / p.eps;
  HFunctional H;
  const CVec3 eta = cross_matrix(CVec3(kI * p.theta.cast<cd>())) * d;
  H.wN = (N && ctx.branch() == Branch::general) ? N->apply(eta) : CVec(CVec::Zero(3 * n));
  const CVec h1 = s.test(s.eval(p.G, 3), 3);
  const CVec h2 = s.test(s.apply(m.Ainv, cell.leading_E(d)), 3);
  const CVec h3 = ie * s.curl(s.test(s.apply(ctx.At(), s.constant_nodal(eta)), 3), kappa);
  H.h = -h1 - h2 - h3;
  H.scale = h1.norm() + h2.norm() + h3.norm();
  if (H.wN.squaredNorm() > 0.0) {
    const CVec h4 = ie * curl_energy(s, ctx.At(), H.wN, kappa);
    H.h -= h4;
    H.scale += h4.norm();
  }

  const double Gn = std::max(s.norm(s.eval(p.G, 3)), 1e-300);
  // <H, phi_D> with phi_D = A^{-1/2} v and v given by coefficients.
  auto pair = [&](const CVec& v) {
    const double nv = std::sqrt(std::max(0.0, s.inner(s.apply(m.Ainv, s.eval(v, 3)), s.eval(v, 3)).real()));
    return nv > 1e-12 ? std::abs(v.dot(H.h)) / (nv * Gn) : 0.0;
  };
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (int t = 0; t < 11; ++t) {
    CVec phi = CVec::Zero(n);
    if (t == 0) {
      phi(s.zero_index()) = 1.0;
    } else {
      for (int i = 0; i < n; ++i) phi(i) = cd(g(rng), g(rng));
    }
    H.phiw = std::max(H.phiw, pair(s.grad(phi, kappa)));
  }
  for (int t = 0; t < 6; ++t) {
    CVec3 c = CVec3::Zero();
    if (t < 3) {
      c(t) = 1.0;
    } else {
      for (int j = 0; j < 3; ++j) c(j) = cd(g(rng), g(rng));
    }
    CVec v = CVec::Zero(3 * n);
    for (int j = 0; j < 3; ++j) v += c(j) * flux_coeffs(cell, j);
    H.wk = std::max(H.wk, pair(v));
  }
  return H;
}

namespace {

ResidualCorrector solve_R(const FibreContext& ctx, const KappaCell& cell, const FibreProblem& p, HFunctional H) {
  const Space& s = ctx.space();
  const Medium& m = ctx.medium();
  const Vec3 kappa = p.kappa();
  const int n = s.nc();
  const double e2 = p.eps * p.eps;
  // K-part penalty: |K u|^2 = beta(u)^H Ginv beta(u), beta_i(u) = <A^{-1} u, flux_i>.
  std::array<CVec, 3> t;
  CMat3 Gk;
  for (int i = 0; i < 3; ++i) t[i] = s.test(s.apply(m.Ainv, cell.flux(i)), 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) Gk(i, j) = s.inner(s.apply(m.Ainv, cell.flux(j)), cell.flux(i));
  Gk = 0.5 * (Gk + Gk.adjoint()).eval();
  Eigen::CompleteOrthogonalDecomposition<CMat3> cod(Gk);
  cod.setThreshold(1e-10);
  const CMat3 Ginv = cod.pseudoInverse();

  const Mat3 Atbar = s.integrate_mat(ctx.At().values).real();
  const double alpha = Atbar.trace() / 3.0;
  Blocks blocks(n);
  for (int i = 0; i < n; ++i) {
    const Vec3 k = s.wave(i, kappa);
    const Mat3 K = cross_matrix(k);
    Mat3 b = K.transpose() * Atbar * K + alpha * k * k.transpose();
    if (k.norm() < 1e-12) b = alpha * Mat3::Identity();
    blocks[i] = b.inverse().cast<cd>();
  }
  auto op = [&](const CVec& u) -> CVec {
    CVec out = curl_energy(s, ctx.At(), u, kappa);
    CVec3 beta;
    for (int i = 0; i < 3; ++i) beta(i) = t[i].dot(u);
    const CVec3 c = Ginv * beta;
    for (int i = 0; i < 3; ++i) out += e2 * c(i) * t[i];
    return out;
  };
  // k . h_m = 0 for every frequency is the gradient identity (checked in assemble_H);
  // enforce it on the round-off so that the semidefinite system is consistent.
  CVec b = H.h;
  for (int i = 0; i < n; ++i) {
    const Vec3 k = s.wave(i, kappa);
    const double k2 = k.squaredNorm();
    if (k2 == 0.0) continue;
    const cd kh = k(0) * b(i) + k(1) * b(n + i) + k(2) * b(2 * n + i);
    for (int c = 0; c < 3; ++c) b(c * n + i) -= k(c) * kh / k2;
  }
  ResidualCorrector R;
  CgOptions o = ctx.options();
  o.abs_floor = 1e-13 * std::sqrt(double(n)) * kmax_of(s, kappa) * H.scale;
  if (b.norm() <= o.abs_floor) {
    R.u = CVec::Zero(3 * n);
  } else {
    CgResult r = pcg_checked(op, block_preconditioner(blocks, n), b, R.u, o, "residual corrector");
    R.iterations = r.iterations;
  }
  // The form does not see gradients; drop them (H annihilates them).
  GradientProjector P(s, kappa, &m.Ainv, true, ctx.options());
  R.u -= s.grad(P.solve(s.eval(R.u, 3)), kappa);
  R.curl_norm = s.norm(s.eval(s.curl(R.u, kappa), 3));
  R.H = std::move(H);
  return R;
}

void check_H(const HFunctional& H) {
  if (H.phiw > 1e-8) throw PropertyViolation("H does not annihilate gradients: " + std::to_string(H.phiw));
  if (H.wk > 1e-8) throw PropertyViolation("H does not annihilate K: " + std::to_string(H.wk));
}

}  // namespace

ResidualCorrector residual_corrector(const FibreContext& ctx, const KappaCell& cell, const FibreProblem& p,
                                     const CVec3& d, const NCorrector* N) {
  HFunctional H = assemble_H(ctx, cell, p, d, N);
  check_H(H);
  return solve_R(ctx, cell, p, std::move(H));
}

// ------------------------------------------------------------------ report

FibreReport error_report(const FibreContext& ctx, const FibreProblem& p, bool keep_fields) {
  const Space& s = ctx.space();
  const Medium& m = ctx.medium();
  p.validate(s);
  const Vec3 kappa = p.kappa();
  FibreReport rep;
  rep.eps = p.eps;
  rep.theta = p.theta;
  rep.kappa = kappa;

  KappaCell cell(s, m, kappa, ctx.options());
  const CVec3 d = fibre_d(ctx, cell, p);
  rep.d = d;
  std::optional<NCorrector> N;
  if (ctx.branch() == Branch::general && p.theta.norm() > 0.0)
    N = solve_a_theta(p.theta, ctx.curl_cell(), ctx.cell0(), ctx.At());
  const NCorrector* Np = N ? &*N : nullptr;

  const FibreSolution sol = solve_fibre(ctx, p);
  rep.iterations = sol.iterations;
  rep.fibre_residual = sol.rel_residual;

  const CVec Gn = s.eval(p.G, 3);
  rep.G_norm = s.norm(Gn);
  const double gn = std::max(rep.G_norm, 1e-300);
  const CVec E = s.eval(sol.u, 3);
  const CVec E_lead = cell.leading_E(d);
  const CVec D = s.apply(m.Aminushalf, E);
  const CVec D_lead = s.apply(m.Aminushalf, E_lead);
  rep.D_norm = s.norm(D);
  rep.err_D = s.norm(D - D_lead);
  rep.err_E = s.norm(E - E_lead);
  const CVec B = s.eval(recover_B(ctx, sol.u, p), 3);
  const CVec B_lead = approx_B(ctx, p, d, Np);
  const CVec H = s.apply(ctx.At(), B);
  const CVec H_lead = s.apply(ctx.At(), B_lead);
  rep.err_B = s.norm(B - B_lead);
  rep.err_H = s.norm(H - H_lead);

  // eps^-2 |curl u|_At^2 + <A^{-1} u, u> = -Re <G, u>
  const CVec cu = s.eval(s.curl(sol.u, kappa), 3);
  const double lhs = s.inner(s.apply(ctx.At(), cu), cu).real() / (p.eps * p.eps) + s.inner(s.apply(m.Ainv, E), E).real();
  const double rhs = -s.inner(Gn, E).real();
  rep.energy_defect = std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-300);
  rep.div_D = weak_div(s, &m.Ainv, E, kappa, gn);

  HFunctional Hf = assemble_H(ctx, cell, p, d, Np);
  rep.H_phiw = Hf.phiw;
  rep.H_wk = Hf.wk;
  rep.H_violation = Hf.phiw > 1e-8 || Hf.wk > 1e-8;
  if (rep.H_violation) {
    rep.curlR_norm = rep.z_norm = std::numeric_limits<double>::quiet_NaN();
  } else {
    const ResidualCorrector R = solve_R(ctx, cell, p, std::move(Hf));
    rep.curlR_norm = R.curl_norm;
    const CVec U = E_lead + p.eps * s.eval(R.H.wN, 3) + p.eps * p.eps * s.eval(R.u, 3);
    rep.z_norm = s.norm(s.apply(m.Aminushalf, E - U));
  }
  if (keep_fields) {
    rep.D = D;
    rep.E = E;
    rep.B = B;
    rep.H = H;
    rep.D_leading = D_lead;
    rep.E_leading = E_lead;
    rep.B_leading = B_lead;
    rep.H_leading = H_lead;
  }
  return rep;
}

}  // namespace homog
