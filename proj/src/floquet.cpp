#include "homog/floquet.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace homog {

// ------------------------------------------------------------------ lattice

SupercellLattice::SupercellLattice(int M, int N) : M_(M), N_(N), w_(2 * N + 1) {
  if (M < 2) throw InvalidSpec("supercell needs M >= 2");
  if (N < 0) throw CutoffTooSmall("negative cutoff");
  for (int j = -(M / 2); j < (M + 1) / 2; ++j) res_.push_back(j);
  const std::vector<int> F = supercell_freqs();
  const int nf = static_cast<int>(F.size());
  std::map<int, int> pos;
  for (int i = 0; i < nf; ++i) pos[F[i]] = i;
  perm_.resize(static_cast<std::size_t>(size()) * nc_cell());
  for (int f = 0; f < size(); ++f) {
    const Eigen::Vector3i j = residue(f);
    for (int i = 0; i < nc_cell(); ++i) {
      const int m[3] = {i / (w_ * w_) - N_, (i / w_) % w_ - N_, i % w_ - N_};
      int p[3];
      for (int a = 0; a < 3; ++a) p[a] = pos.at(M_ * m[a] + j(a));
      perm_[static_cast<std::size_t>(f) * nc_cell() + i] = (p[0] * nf + p[1]) * nf + p[2];
    }
  }
}

Eigen::Vector3i SupercellLattice::residue(int f) const {
  return Eigen::Vector3i(res_[f / (M_ * M_)], res_[(f / M_) % M_], res_[f % M_]);
}

Vec3 SupercellLattice::kappa(int f) const { return (kTwoPi / M_) * residue(f).cast<double>(); }

std::vector<int> SupercellLattice::supercell_freqs() const {
  std::vector<int> F;
  for (int m = -N_; m <= N_; ++m)
    for (int j : res_) F.push_back(M_ * m + j);
  std::sort(F.begin(), F.end());
  return F;
}

Space SupercellLattice::supercell_space(const MeasureSpec& mu, int P) const {
  return Space(mu, supercell_freqs(), M_, P);
}

nlohmann::json SupercellLattice::manifest(double eps) const {
  nlohmann::json j;
  j["M"] = M_;
  j["N"] = N_;
  j["eps"] = eps;
  j["residues"] = res_;
  j["kappa"] = "2 pi j / M";
  j["theta"] = "kappa / eps";
  j["coefficient_order"] = "component-major, supercell frequencies sorted per axis, axis 0 slowest";
  return j;
}

// ------------------------------------------------------------------ fields

SupercellField SupercellField::zeros(const SupercellLattice& lat, double eps, int ncomp) {
  SupercellField u;
  u.M = lat.M();
  u.N = lat.N();
  u.eps = eps;
  u.ncomp = ncomp;
  u.coeffs = CVec::Zero(static_cast<Eigen::Index>(ncomp) * lat.nc_super());
  return u;
}

void SupercellField::validate(const SupercellLattice& lat) const {
  if (M != lat.M() || N != lat.N()) throw RankMismatch("supercell field does not match the lattice");
  if (!(eps > 0.0)) throw InvalidSpec("supercell field needs eps > 0");
  if (coeffs.size() != static_cast<Eigen::Index>(ncomp) * lat.nc_super())
    throw RankMismatch("supercell field has the wrong number of coefficients");
  if (!coeffs.allFinite()) throw InvalidSpec("supercell field is not finite");
}

FloquetFamily floquet_forward(const SupercellLattice& lat, const SupercellField& u) {
  u.validate(lat);
  const int n = lat.nc_cell(), ns = lat.nc_super();
  FloquetFamily out(lat.size());
  for (int f = 0; f < lat.size(); ++f) {
    CVec a(u.ncomp * n);
    for (int c = 0; c < u.ncomp; ++c)
      for (int i = 0; i < n; ++i) a(c * n + i) = u.coeffs(static_cast<Eigen::Index>(c) * ns + lat.super_index(f, i));
    out[f] = std::move(a);
  }
  return out;
}

SupercellField floquet_inverse(const SupercellLattice& lat, const FloquetFamily& family, int ncomp, double eps) {
  if (static_cast<int>(family.size()) != lat.size())
    throw IncompleteFamily("family does not cover the theta lattice");
  const int n = lat.nc_cell(), ns = lat.nc_super();
  SupercellField u = SupercellField::zeros(lat, eps, ncomp);
  for (int f = 0; f < lat.size(); ++f) {
    if (family[f].size() != ncomp * n) throw IncompleteFamily("missing or malformed fibre amplitude");
    for (int c = 0; c < ncomp; ++c)
      for (int i = 0; i < n; ++i) u.coeffs(static_cast<Eigen::Index>(c) * ns + lat.super_index(f, i)) = family[f](c * n + i);
  }
  return u;
}

double family_norm(const Space& cell, const FloquetFamily& family, int ncomp) {
  double s = 0.0;
  for (const CVec& a : family) {
    const double x = cell.norm(cell.eval(a, ncomp));
    s += x * x;
  }
  return std::sqrt(s);
}

SupercellField supercell_current(const SupercellLattice& lat, const Space& cell, double eps, std::uint64_t seed,
                                 int band) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  SupercellField G = SupercellField::zeros(lat, eps);
  const std::vector<int> F = lat.supercell_freqs();
  const int nf = static_cast<int>(F.size()), ns = lat.nc_super();
  for (int i = 0; i < ns; ++i) {
    const int K[3] = {F[i / (nf * nf)], F[(i / nf) % nf], F[i % nf]};
    if (std::max({std::abs(K[0]), std::abs(K[1]), std::abs(K[2])}) > band) continue;
    for (int c = 0; c < 3; ++c) G.coeffs(static_cast<Eigen::Index>(c) * ns + i) = cd(g(rng), g(rng));
  }
  FloquetFamily fam = floquet_forward(lat, G);
  for (int f = 0; f < lat.size(); ++f)
    if (fam[f].norm() > 0.0) fam[f] = project_div_free(cell, fam[f], lat.kappa(f));
  return floquet_inverse(lat, fam, 3, eps);
}

// ---------------------------------------------------------- direct integral

DirectIntegralReport direct_integral_check(const FibreContext& ctx, const SupercellLattice& lat,
                                           const SupercellField& G) {
  const Space& cell = ctx.space();
  if (cell.N() != lat.N() || cell.L() != 1) throw RankMismatch("cell space does not match the lattice");
  G.validate(lat);
  DirectIntegralReport rep;
  rep.M = lat.M();
  rep.eps = G.eps;
  const Space sup = lat.supercell_space(cell.measure(), cell.P());
  const Medium ms = Medium::build(sup, ctx.medium().field);
  const NodalMaterial Ats = sup.material(ctx.At_field());
  const Vec3 zero = Vec3::Zero();

  const FibreSolution mono = solve_resolvent(sup, ms.Ainv, Ats, G.eps, zero, G.coeffs, ctx.options());
  rep.monolithic_iterations = mono.iterations;

  const FloquetFamily Gf = floquet_forward(lat, G);
  FloquetFamily Uf(lat.size());
  for (int f = 0; f < lat.size(); ++f) {
    const FibreSolution s =
        solve_resolvent(cell, ctx.medium().Ainv, ctx.At(), G.eps, lat.kappa(f), Gf[f], ctx.options());
    rep.fibre_iterations += s.iterations;
    Uf[f] = s.u;
  }
  const SupercellField U = floquet_inverse(lat, Uf, 3, G.eps);

  const CVec diff = mono.u - U.coeffs;
  const double e_mono = resolvent_energy(sup, ms.Ainv, Ats, G.eps, zero, mono.u);
  rep.discrepancy = resolvent_energy(sup, ms.Ainv, Ats, G.eps, zero, diff) / std::max(e_mono, 1e-300);
  const CVec Dm = sup.apply(ms.Aminushalf, sup.eval(mono.u, 3));
  rep.solution_norm = sup.norm(Dm);
  rep.field_discrepancy =
      sup.norm(sup.apply(ms.Aminushalf, sup.eval(diff, 3))) / std::max(rep.solution_norm, 1e-300);
  // Averaged supercell norm against the fibre sum.
  const double a = sup.norm(sup.eval(G.coeffs, 3)), b = family_norm(cell, Gf, 3);
  rep.parseval_defect = std::abs(a - b) / std::max(a, 1e-300);
  return rep;
}

// ---------------------------------------------------------------- assembly

namespace {

CVec flux_combination(const KappaCell& cell, const CVec3& d) {
  CVec out = CVec::Zero(3 * cell.space().nc());
  for (int k = 0; k < 3; ++k)
    if (d(k) != 0.0) out += d(k) * flux_coeffs(cell, k);
  return out;
}

}  // namespace

HomogenisedAssembly assemble_homogenised(const FibreContext& ctx, const SupercellLattice& lat,
                                         const SupercellField& g) {
  const Space& s = ctx.space();
  const Medium& m = ctx.medium();
  g.validate(lat);
  const double eps = g.eps;
  const FloquetFamily Gf = floquet_forward(lat, g);
  const int n3 = 3 * s.nc();
  FloquetFamily exact(lat.size(), CVec::Zero(n3)), lead(lat.size(), CVec::Zero(n3)), cl(lat.size(), CVec::Zero(n3));
  HomogenisedAssembly out;
  double g2 = 0.0, D2 = 0.0, eD = 0.0, eDc = 0.0, eB = 0.0, eBc = 0.0;
  for (int f = 0; f < lat.size(); ++f) {
    if (Gf[f].norm() == 0.0) continue;
    ++out.active_fibres;
    FibreProblem p;
    p.eps = eps;
    p.theta = lat.theta(f, eps);
    p.G = Gf[f];
    const FibreSolution sol = solve_fibre(ctx, p);
    exact[f] = sol.u;
    KappaCell cell(s, m, p.kappa(), ctx.options());
    const CVec3 d = fibre_d(ctx, cell, p);
    const CVec3 G_mean = s.integrate3(s.eval(p.G, 3));
    const CVec3 d0 = d_theta(p.theta, G_mean, ctx.cell0().A_hat(), ctx.A_tilde_hom(), ctx.branch(), ctx.literal());
    lead[f] = flux_combination(cell, d);
    cl[f] = flux_combination(ctx.cell0(), d0);

    std::optional<NCorrector> N;
    if (ctx.branch() == Branch::general && p.theta.norm() > 0.0)
      N = solve_a_theta(p.theta, ctx.curl_cell(), ctx.cell0(), ctx.At());
    const NCorrector* Np = N ? &*N : nullptr;

    auto sq = [](double x) { return x * x; };
    const CVec E = s.eval(sol.u, 3);
    g2 += sq(s.norm(s.eval(p.G, 3)));
    D2 += sq(s.norm(s.apply(m.Aminushalf, E)));
    eD += sq(s.norm(s.apply(m.Aminushalf, E - s.eval(lead[f], 3))));
    eDc += sq(s.norm(s.apply(m.Aminushalf, E - s.eval(cl[f], 3))));
    const CVec B = s.eval(recover_B(ctx, sol.u, p), 3);
    eB += sq(s.norm(B - approx_B(ctx, p, d, Np)));
    eBc += sq(s.norm(B - approx_B(ctx, p, d0, Np)));
  }
  out.exact_E = floquet_inverse(lat, exact, 3, eps);
  out.assembled_E = floquet_inverse(lat, lead, 3, eps);
  out.classical_E = floquet_inverse(lat, cl, 3, eps);
  out.g_norm = std::sqrt(g2);
  out.D_norm = std::sqrt(D2);
  const double gn = std::max(out.g_norm, 1e-300);
  out.err_D = std::sqrt(eD) / gn;
  out.err_D_classical = std::sqrt(eDc) / gn;
  out.err_B = std::sqrt(eB) / gn;
  out.err_B_classical = std::sqrt(eBc) / gn;
  return out;
}

// -------------------------------------------------------------------- tail

CMat3 homogenised_symbol(const Vec3& theta, const CMat3& A_hat, const CMat3& A_tilde_hom) {
  const CMat3 Ainv = A_hat.inverse();
  const CMat3 Ith = cross_matrix(CVec3(kI * theta.cast<cd>()));
  const CMat3 S = Ith * A_tilde_hom * Ith * Ainv + CMat3::Identity();
  CMat3 P = CMat3::Identity();
  if (theta.norm() > 0.0) {
    const CVec3 t = (theta / theta.norm()).cast<cd>();
    P -= t * t.adjoint();
  }
  return Ainv * S.fullPivLu().solve(P);
}

TailReport tail_bound(const FibreContext& ctx, double eps) {
  if (!(eps > 0.0)) throw InvalidSpec("tail bound needs eps > 0");
  const Space& s = ctx.space();
  const Medium& m = ctx.medium();
  TailReport rep;
  rep.eps = eps;
  const double C1inv = m.A.lam_max, C2inv = m.A.lam_min;
  rep.bound = C1inv * eps * eps / (C2inv * kPi * kPi + eps * eps);
  const std::vector<Vec3> dirs = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 1, 0), Vec3(1, -1, 1),
                                  Vec3(0.5, 1, 0.25)};
  const double scales[] = {1.0, 1.25, 1.5, 2.0, 3.0};
  std::map<std::array<long long, 3>, CMat3> tensors;
  for (const Vec3& d : dirs) {
    const Vec3 u = d / d.cwiseAbs().maxCoeff();
    for (double sc : scales) {
      const Vec3 theta = sc * (kPi / eps) * u;
      const Vec3 kappa = reduce_kappa(eps * theta);
      std::array<long long, 3> key;
      for (int i = 0; i < 3; ++i) key[i] = std::llround(kappa(i) * 1e9);
      auto it = tensors.find(key);
      if (it == tensors.end()) it = tensors.emplace(key, KappaCell(s, m, kappa, ctx.options()).A_hat()).first;
      Eigen::JacobiSVD<CMat3> svd(homogenised_symbol(theta, it->second, ctx.A_tilde_hom()));
      TailSample t;
      t.theta = theta;
      t.norm = svd.singularValues()(0);
      rep.measured = std::max(rep.measured, t.norm);
      rep.samples.push_back(t);
    }
  }
  rep.ratio = rep.measured / rep.bound;
  return rep;
}

}  // namespace homog
