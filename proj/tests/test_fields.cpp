#include <doctest.h>

#include <random>

#include "homog/fields.hpp"

using namespace homog;

namespace {

CVec random_coeffs(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  CVec v(n);
  for (int i = 0; i < n; ++i) v(i) = cd(g(rng), g(rng));
  return v;
}

QuasiField random_field(std::mt19937_64& rng, int N, Rank r, const Vec3& kappa) {
  QuasiField f = QuasiField::zeros(N, r, kappa);
  f.coeffs = random_coeffs(rng, static_cast<int>(f.coeffs.size()));
  return f;
}

}  // namespace

TEST_CASE("reduce_kappa maps into the Brillouin cell") {
  const Vec3 r = reduce_kappa(Vec3(kPi, -kPi - 0.1, 7.0));
  CHECK(r(0) == doctest::Approx(-kPi));
  CHECK(r(1) == doctest::Approx(kPi - 0.1));
  CHECK(r(2) == doctest::Approx(7.0 - kTwoPi));
}

TEST_CASE("shifted operators on simple fields") {
  const Vec3 kappa(0.3, -1.2, 2.5);
  QuasiField c = QuasiField::zeros(2, Rank::vector, kappa);
  const CVec3 cv(1.0, cd(0.0, 2.0), -0.5);
  for (int j = 0; j < 3; ++j) c.at(j, 0, 0, 0) = cv(j);
  const auto cc = apply_shifted_operator(DiffOp::curl, c);
  const CVec3 expect = (kI * kappa.cast<cd>()).cross(cv);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(cc.at(j, 0, 0, 0) - expect(j)) < 1e-15);
  CHECK(cc.coeffs.norm() == doctest::Approx(expect.norm()));

  QuasiField s = QuasiField::zeros(2, Rank::scalar);
  s.at(0, 1, -2, 0) = 1.0;
  const auto gs = apply_shifted_operator(DiffOp::grad, s);
  CHECK(std::abs(gs.at(0, 1, -2, 0) - kI * kTwoPi) < 1e-14);
  CHECK(std::abs(gs.at(1, 1, -2, 0) + kI * 2.0 * kTwoPi) < 1e-14);
  CHECK(std::abs(gs.coeffs.norm() - kTwoPi * std::sqrt(5.0)) < 1e-12);

  CHECK_THROWS_AS(apply_shifted_operator(DiffOp::curl, s), RankMismatch);
  CHECK_THROWS_AS(apply_shifted_operator(DiffOp::grad, c), RankMismatch);
}

TEST_CASE("div curl and curl grad vanish") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> k(-kPi, kPi);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec3 kappa(k(rng), k(rng), k(rng));
    const auto v = random_field(rng, 3, Rank::vector, kappa);
    const auto dc = apply_shifted_operator(DiffOp::div, apply_shifted_operator(DiffOp::curl, v));
    CHECK(dc.coeffs.cwiseAbs().maxCoeff() < 1e-13 * v.coeffs.norm() * 400);
    const auto p = random_field(rng, 3, Rank::scalar, kappa);
    const auto cg = apply_shifted_operator(DiffOp::curl, apply_shifted_operator(DiffOp::grad, p));
    CHECK(cg.coeffs.cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("truncated material product") {
  QuasiField e1 = QuasiField::zeros(2, Rank::vector);
  e1.at(0, 0, 0, 0) = 1.0;
  const auto same = multiply_material(MaterialField::identity(), e1);
  CHECK((same.coeffs - e1.coeffs).norm() == 0.0);

  const auto lam = multiply_material(MaterialField::scalar_laminate(0, 2.0, 1.0), e1);
  CHECK(std::abs(lam.at(0, 0, 0, 0) - 2.0) < 1e-15);
  CHECK(std::abs(lam.at(0, 1, 0, 0) - 0.5) < 1e-15);
  CHECK(std::abs(lam.at(0, -1, 0, 0) - 0.5) < 1e-15);
  CHECK(lam.coeffs.norm() == doctest::Approx(std::sqrt(4.5)));
}

TEST_CASE("material product agrees with collocation on low modes") {
  std::mt19937_64 rng(5);
  const auto a = MaterialField::random_spd(rng, 0.5, 2.0);
  // Field with modes in [-1,1]^3 at cutoff 2: the truncated product is exact.
  QuasiField u = QuasiField::zeros(2, Rank::vector);
  for (int j = 0; j < 3; ++j)
    for (int p = -1; p <= 1; ++p)
      for (int q = -1; q <= 1; ++q)
        for (int r = -1; r <= 1; ++r) u.at(j, p, q, r) = random_coeffs(rng, 1)(0);
  const auto au = multiply_material(a, u);
  Space s(MeasureSpec::lebesgue(), 2);
  const CVec lhs = s.to_nodal(au);
  const CVec rhs = s.apply(s.material(a), s.to_nodal(u));
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("moment inner product") {
  const auto leb = fourier_moments(MeasureSpec::lebesgue(), 2);
  QuasiField one = QuasiField::zeros(1, Rank::scalar);
  one.at(0, 0, 0, 0) = 1.0;
  QuasiField wave = QuasiField::zeros(1, Rank::scalar);
  wave.at(0, 1, 0, 0) = 1.0;
  CHECK(std::abs(inner_product(one, one, leb) - 1.0) < 1e-15);
  CHECK(std::abs(inner_product(wave, wave, leb) - 1.0) < 1e-15);
  CHECK(std::abs(inner_product(wave, one, leb)) < 1e-15);

  const auto plane = fourier_moments(MeasureSpec::planes({{0, 0.0}}), 2);
  CHECK(std::abs(inner_product(wave, one, plane) - 1.0) < 1e-15);
  CHECK(std::abs(inner_product(one, one, plane) - 1.0) < 1e-15);

  CHECK_THROWS_AS(inner_product(one, one, fourier_moments(MeasureSpec::lebesgue(), 0)), CutoffTooSmall);
}

TEST_CASE("quadrature inner product equals the moment double sum") {
  std::mt19937_64 rng(3);
  const std::vector<MeasureSpec> specs = {MeasureSpec::lebesgue(), MeasureSpec::planes({{0, 0.0}, {1, 0.0}, {2, 0.0}}),
                                          MeasureSpec::planes({{2, 0.0}, {2, 0.5}})};
  for (const auto& spec : specs) {
    const int N = 2;
    Space s(spec, N);
    const auto mom = fourier_moments(spec, N);
    const Vec3 kappa(0.4, 0.1, -2.0);
    const auto u = random_field(rng, N, Rank::vector, kappa);
    const auto v = random_field(rng, N, Rank::vector, kappa);
    const cd a = inner_product(u, v, mom);
    const cd b = s.inner(s.to_nodal(u), s.to_nodal(v));
    CHECK(std::abs(a - b) < 1e-11 * std::abs(a) + 1e-11);
    // test() is the weighted adjoint of eval().
    const cd c = v.coeffs.dot(s.test(s.to_nodal(u), 3));
    CHECK(std::abs(c - a) < 1e-10 * std::abs(a) + 1e-10);
  }
}

TEST_CASE("Gram operator rank") {
  const int N = 2, n = 2 * N + 1;
  GramOperator leb(fourier_moments(MeasureSpec::lebesgue(), N), N);
  CHECK(leb.rank() == n * n * n);
  CHECK((leb.matrix() - Eigen::MatrixXcd::Identity(n * n * n, n * n * n)).norm() < 1e-14);

  GramOperator one(fourier_moments(MeasureSpec::planes({{2, 0.25}}), N), N);
  CHECK(one.rank() == n * n);

  GramOperator two(fourier_moments(MeasureSpec::planes({{2, 0.0}, {2, 0.5}}), N), N);
  CHECK(two.rank() == 2 * n * n);
  for (int i = 0; i < two.eigenvalues().size(); ++i) CHECK(two.eigenvalues()(i) > -1e-12);
}

TEST_CASE("square root material") {
  const auto id = square_root_material(MaterialField::identity());
  CHECK((id.at(Vec3(0.2, 0.3, 0.4)) - Mat3::Identity()).norm() < 1e-14);

  const auto lam = MaterialField::scalar_laminate(0, 2.0, 1.0);
  const auto r = square_root_material(lam, 41);
  for (double y : {0.0, 0.13, 0.5, 0.77}) {
    const double expect = std::sqrt(2.0 + std::cos(kTwoPi * y));
    CHECK(std::abs(r.at(Vec3(y, 0.1, 0.9))(0, 0) - expect) < 1e-8);
    CHECK(std::abs(r.at(Vec3(y, 0.1, 0.9))(1, 2)) < 1e-14);
  }
}

TEST_CASE("material validation") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 5; ++t) {
    const auto a = MaterialField::random_spd(rng, 0.5, 3.0);
    CHECK(a.symmetry_defect() < 1e-14);
    const auto [lo, hi] = a.ellipticity();
    CHECK(lo > 0.0);
    CHECK(hi >= lo);
    const auto back = MaterialField::from_json(a.to_json());
    CHECK((back.at(Vec3(0.1, 0.2, 0.3)) - a.at(Vec3(0.1, 0.2, 0.3))).norm() < 1e-14);
  }
  CHECK_THROWS_AS(MaterialField::scalar_laminate(0, 1.0, 2.0).validate(), NotPositiveDefinite);
}

TEST_CASE("supercell space reproduces cell integrals") {
  // Functions with period 1 integrate identically on the 2-cell supercell.
  std::mt19937_64 rng(2);
  const int N = 2, M = 2;
  std::vector<int> f;
  for (int m = -N; m <= N; ++m)
    for (int j = 0; j < M; ++j) f.push_back(M * m + j);
  std::sort(f.begin(), f.end());
  Space cell(MeasureSpec::lebesgue(), N);
  Space sup(MeasureSpec::lebesgue(), f, M, cell.P());
  const CVec u = random_coeffs(rng, cell.nc());
  CVec U = CVec::Zero(sup.nc());
  for (int i = 0; i < cell.nc(); ++i) {
    const Eigen::Vector3i m = cell.freq(i);
    int idx = 0;
    for (int ax = 0; ax < 3; ++ax) {
      const auto it = std::find(f.begin(), f.end(), M * m(ax));
      idx = idx * sup.nf() + static_cast<int>(it - f.begin());
    }
    U(idx) = u(i);
  }
  CHECK(std::abs(cell.inner(cell.eval(u, 1), cell.eval(u, 1)) - sup.inner(sup.eval(U, 1), sup.eval(U, 1))) < 1e-11);
}
