#include <doctest.h>

#include <random>
#include <set>

#include "homog/floquet.hpp"

using namespace homog;

namespace {

SupercellField random_field(const SupercellLattice& lat, std::uint64_t seed, int ncomp = 3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  SupercellField u = SupercellField::zeros(lat, 0.5, ncomp);
  for (Eigen::Index i = 0; i < u.coeffs.size(); ++i) u.coeffs(i) = cd(g(rng), g(rng));
  return u;
}

}  // namespace

TEST_CASE("supercell lattice is a permutation") {
  for (int M : {2, 3, 4}) {
    const SupercellLattice lat(M, 2);
    CHECK(static_cast<int>(lat.supercell_freqs().size()) == M * 5);
    std::set<int> seen;
    for (int f = 0; f < lat.size(); ++f)
      for (int i = 0; i < lat.nc_cell(); ++i) seen.insert(lat.super_index(f, i));
    CHECK(static_cast<int>(seen.size()) == lat.nc_super());
    CHECK(*seen.rbegin() == lat.nc_super() - 1);
    for (int f = 0; f < lat.size(); ++f) CHECK(lat.kappa(f).cwiseAbs().maxCoeff() <= kPi);
  }
  CHECK_THROWS_AS(SupercellLattice(1, 2), InvalidSpec);
}

TEST_CASE("floquet round trip and Parseval") {
  for (const auto& spec : {MeasureSpec::lebesgue(), MeasureSpec::planes({{0, 0.0}, {1, 0.25}})}) {
    Space cell(spec, 2);
    const SupercellLattice lat(2, 2);
    const Space sup = lat.supercell_space(spec, cell.P());
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const SupercellField u = random_field(lat, seed);
      const FloquetFamily fam = floquet_forward(lat, u);
      CHECK(static_cast<int>(fam.size()) == 8);
      const SupercellField back = floquet_inverse(lat, fam, 3, u.eps);
      CHECK((back.coeffs - u.coeffs).norm() == 0.0);
      const double a = sup.norm(sup.eval(u.coeffs, 3));
      CHECK(std::abs(a - family_norm(cell, fam, 3)) < 1e-12 * a);
    }
  }
}

TEST_CASE("floquet matches the nodal sum over cells") {
  Space cell(MeasureSpec::lebesgue(), 2);
  const SupercellLattice lat(2, 2);
  const Space sup = lat.supercell_space(MeasureSpec::lebesgue(), cell.P());
  const SupercellField u = random_field(lat, 99, 1);
  const CVec U = sup.eval(u.coeffs, 1);
  const FloquetFamily fam = floquet_forward(lat, u);
  const int P = cell.P(), M = lat.M(), S = M * P;
  double worst = 0.0;
  for (int f = 0; f < lat.size(); ++f) {
    const CVec amp = cell.eval(fam[f], 1);
    const Vec3 k = lat.kappa(f);
    for (int r = 0; r < P * P * P; ++r) {
      const int r0 = r / (P * P), r1 = (r / P) % P, r2 = r % P;
      cd sum = 0.0;
      for (int n0 = 0; n0 < M; ++n0)
        for (int n1 = 0; n1 < M; ++n1)
          for (int n2 = 0; n2 < M; ++n2) {
            const int q = ((n0 * P + r0) * S + (n1 * P + r1)) * S + (n2 * P + r2);
            const Vec3 x = sup.points()[q];
            sum += std::polar(1.0, -k.dot(x)) * U(q);
          }
      worst = std::max(worst, std::abs(sum / double(M * M * M) - amp(r)));
    }
  }
  CHECK(worst < 1e-12 * U.cwiseAbs().maxCoeff());
}

TEST_CASE("floquet simple fields") {
  const SupercellLattice lat(2, 1);
  // Same cell data in every fibre: a comb concentrated on the supercell lattice.
  SupercellField comb = SupercellField::zeros(lat, 0.5, 1);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  CVec v(lat.nc_cell());
  for (int i = 0; i < v.size(); ++i) v(i) = cd(g(rng), g(rng));
  for (int f = 0; f < lat.size(); ++f)
    for (int i = 0; i < lat.nc_cell(); ++i) comb.coeffs(lat.super_index(f, i)) = v(i);
  const FloquetFamily fam = floquet_forward(lat, comb);
  for (const CVec& a : fam) CHECK((a - v).norm() == 0.0);
  Space cell(MeasureSpec::lebesgue(), 1);
  const Space sup = lat.supercell_space(MeasureSpec::lebesgue(), cell.P());
  const CVec U = sup.eval(comb.coeffs, 1);
  const int P = cell.P(), S = 2 * P;
  for (int q = 0; q < U.size(); ++q) {
    const int i0 = q / (S * S), i1 = (q / S) % S, i2 = q % S;
    if (i0 % P || i1 % P || i2 % P) continue;
    if (i0 == 0 && i1 == 0 && i2 == 0) continue;
    CHECK(std::abs(U(q)) < 1e-12 * U.cwiseAbs().maxCoeff());
  }

  // e_kappa times a periodic field lives in one fibre.
  const int f0 = 5;
  const Vec3 k0 = lat.kappa(f0);
  CVec w(cell.nc());
  for (int i = 0; i < w.size(); ++i) w(i) = cd(g(rng), g(rng));
  CVec nodal(sup.Q());
  const CVec wcell = w;
  for (int q = 0; q < sup.Q(); ++q) {
    const Vec3 x = sup.points()[q];
    cd val = 0.0;
    for (int i = 0; i < cell.nc(); ++i) val += wcell(i) * std::polar(1.0, cell.wave(i, Vec3::Zero()).dot(x));
    nodal(q) = std::polar(1.0, k0.dot(x)) * val;
  }
  SupercellField e = SupercellField::zeros(lat, 0.5, 1);
  e.coeffs = sup.test(nodal, 1);
  const FloquetFamily fe = floquet_forward(lat, e);
  for (int f = 0; f < lat.size(); ++f) {
    if (f == f0)
      CHECK((fe[f] - w).norm() < 1e-12 * w.norm());
    else
      CHECK(fe[f].norm() < 1e-12 * w.norm());
  }
}

TEST_CASE("incomplete families are rejected") {
  const SupercellLattice lat(2, 1);
  FloquetFamily fam(lat.size(), CVec::Zero(3 * lat.nc_cell()));
  CHECK_NOTHROW(floquet_inverse(lat, fam, 3, 0.5));
  fam[3] = CVec();
  CHECK_THROWS_AS(floquet_inverse(lat, fam, 3, 0.5), IncompleteFamily);
  fam.pop_back();
  CHECK_THROWS_AS(floquet_inverse(lat, fam, 3, 0.5), IncompleteFamily);
  SupercellField bad = SupercellField::zeros(lat, 0.5);
  bad.coeffs.conservativeResize(5);
  CHECK_THROWS_AS(floquet_forward(lat, bad), RankMismatch);
}

TEST_CASE("direct integral: monolithic and fibrewise solves agree") {
  struct Case {
    MeasureSpec mu;
    MaterialField A, At;
    Branch branch;
    double tol;
  };
  const std::vector<Case> cases = {
      {MeasureSpec::lebesgue(), MaterialField::identity(), MaterialField::identity(), Branch::unit_permeability,
       1e-12},
      {MeasureSpec::lebesgue(), MaterialField::scalar_laminate(0, 2.0, 1.0), MaterialField::identity(),
       Branch::unit_permeability, 1e-9},
      {MeasureSpec::lebesgue(), MaterialField::scalar_laminate(0, 2.0, 1.0),
       MaterialField::scalar_laminate(1, 2.0, 1.0), Branch::general, 1e-9},
      {MeasureSpec::planes({{0, 0.0}, {1, 0.0}, {2, 0.0}}), MaterialField::scalar_laminate(0, 2.0, 1.0),
       MaterialField::identity(), Branch::unit_permeability, 1e-8},
  };
  for (const auto& c : cases) {
    Space cell(c.mu, 2);
    const Medium m = Medium::build(cell, c.A);
    FibreContext ctx(cell, m, c.At, c.branch);
    const SupercellLattice lat(2, 2);
    const SupercellField G = supercell_current(lat, cell, 0.5, 11, 2);
    const DirectIntegralReport r = direct_integral_check(ctx, lat, G);
    CHECK(r.solution_norm > 0.0);
    CHECK(r.discrepancy < c.tol);
    CHECK(r.field_discrepancy < c.tol);
    CHECK(r.parseval_defect < 1e-12);
  }
}

TEST_CASE("homogenised assembly") {
  Space cell(MeasureSpec::lebesgue(), 2);
  const SupercellLattice lat(4, 2);
  {
    const Medium id = Medium::build(cell, MaterialField::identity());
    FibreContext ctx(cell, id, MaterialField::identity(), Branch::unit_permeability);
    const SupercellField g = supercell_current(lat, cell, 0.25, 3, 1);
    const HomogenisedAssembly h = assemble_homogenised(ctx, lat, g);
    CHECK(h.active_fibres == 27);
    CHECK(h.err_D < 1e-10);
    CHECK(h.err_B < 1e-10);
    CHECK((h.exact_E.coeffs - h.assembled_E.coeffs).norm() < 1e-10 * h.exact_E.coeffs.norm());
  }
  const Medium lam = Medium::build(cell, MaterialField::scalar_laminate(0, 2.0, 1.0));
  FibreContext ctx(cell, lam, MaterialField::identity(), Branch::unit_permeability);
  const SupercellField g = supercell_current(lat, cell, 0.25, 4, 1);
  const HomogenisedAssembly h = assemble_homogenised(ctx, lat, g);
  CHECK(h.err_D < h.err_D_classical);
  CHECK(h.err_D > 0.0);
}

TEST_CASE("tail bound for injected high theta") {
  Space cell(MeasureSpec::lebesgue(), 2);
  const Medium id = Medium::build(cell, MaterialField::identity());
  FibreContext cid(cell, id, MaterialField::identity(), Branch::unit_permeability);
  const TailReport t = tail_bound(cid, 0.25);
  CHECK(std::abs(t.ratio - 1.0) < 1e-12);

  const Medium lam = Medium::build(cell, MaterialField::scalar_laminate(0, 2.0, 1.0));
  FibreContext ctx(cell, lam, MaterialField::identity(), Branch::unit_permeability);
  double lo = 1e300, hi = 0.0;
  for (double eps : {0.25, 0.125, 0.0625}) {
    const TailReport r = tail_bound(ctx, eps);
    CHECK(r.measured <= r.bound * (1.0 + 1e-12));
    lo = std::min(lo, r.ratio);
    hi = std::max(hi, r.ratio);
  }
  CHECK(hi / lo <= 2.0);
}
