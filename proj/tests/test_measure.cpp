#include <doctest.h>

#include <random>

#include "homog/measure.hpp"

using namespace homog;

namespace {

// Brute-force plane quadrature: average of exp(-2 pi i m.y) over a fine grid on each component.
cd grid_moment(const MeasureSpec& spec, int m1, int m2, int m3, int pts = 64) {
  const MeasureSpec s = normalize(spec);
  const int m[3] = {m1, m2, m3};
  cd total = 0.0;
  for (const auto& c : s.components) {
    std::vector<int> free;
    for (int ax = 0; ax < 3; ++ax)
      if (!c.frozen(ax)) free.push_back(ax);
    const int count = static_cast<int>(std::pow(pts, free.size()));
    cd acc = 0.0;
    for (int idx = 0; idx < count; ++idx) {
      double y[3];
      for (int ax = 0; ax < 3; ++ax) y[ax] = c.offset(ax);
      int r = idx;
      for (int ax : free) {
        y[ax] = (r % pts + 0.5) / pts;
        r /= pts;
      }
      acc += std::polar(1.0, -kTwoPi * (m[0] * y[0] + m[1] * y[1] + m[2] * y[2]));
    }
    total += c.weight * acc / double(count);
  }
  return total;
}

}  // namespace

TEST_CASE("normalize rescales weights") {
  auto leb = normalize(MeasureSpec::lebesgue());
  CHECK(leb.components[0].weight == doctest::Approx(1.0));

  auto two = normalize(MeasureSpec::planes({{2, 0.0}, {2, 0.5}}));
  CHECK(two.components[0].weight == doctest::Approx(0.5));
  CHECK(two.components[1].weight == doctest::Approx(0.5));

  MeasureSpec mix;
  mix.kind = MeasureKind::mixture;
  mix.components = {Subspace{{}, {}, 3.0}, Subspace{{0}, {0.0}, 1.0}};
  auto n = normalize(mix);
  CHECK(n.components[0].weight == doctest::Approx(0.75));
  CHECK(n.components[1].weight == doctest::Approx(0.25));
  CHECK(n.total_mass == doctest::Approx(1.0));
}

TEST_CASE("invalid specs are rejected") {
  MeasureSpec bad = MeasureSpec::planes({{2, 0.25}});
  bad.components[0].weight = -1.0;
  CHECK_THROWS_AS(normalize(bad), InvalidSpec);

  MeasureSpec dup = MeasureSpec::planes({{2, 0.25}, {2, 0.25}});
  CHECK_THROWS_AS(dup.validate(), InvalidSpec);

  // A line inside a plane of the same arrangement.
  MeasureSpec nested;
  nested.kind = MeasureKind::arrangement;
  nested.components = {Subspace{{2}, {0.5}, 1.0}, Subspace{{0, 2}, {0.1, 0.5}, 1.0}};
  CHECK_THROWS_AS(nested.validate(), InvalidSpec);

  MeasureSpec empty;
  empty.kind = MeasureKind::arrangement;
  CHECK_THROWS_AS(normalize(empty), EmptyMeasure);
}

TEST_CASE("closed-form moments") {
  auto leb = fourier_moments(MeasureSpec::lebesgue(), 2);
  CHECK(std::abs(leb(0, 0, 0) - 1.0) < 1e-15);
  CHECK(std::abs(leb(1, 0, -3)) == 0.0);

  auto plane = normalize(MeasureSpec::planes({{2, 0.25}}));
  const cd v = moment(plane, 0, 0, 1);
  CHECK(std::abs(v - cd(0.0, -1.0)) < 1e-14);
  CHECK(std::abs(v - grid_moment(plane, 0, 0, 1)) < 1e-12);

  auto grid = normalize(MeasureSpec::planes({{0, 0.0}, {1, 0.0}}));
  CHECK(std::abs(moment(grid, 1, 0, 0) - 0.5) < 1e-15);
  CHECK(std::abs(grid_moment(grid, 1, 0, 0) - 0.5) < 1e-12);
}

TEST_CASE("moment tables are Hermitian, bounded and additive") {
  MeasureSpec mix;
  mix.kind = MeasureKind::mixture;
  mix.components = {Subspace{{}, {}, 2.0}, Subspace{{0}, {0.3}, 1.0}, Subspace{{1, 2}, {0.1, 0.7}, 1.5}};
  const auto s = normalize(mix);
  const auto t = fourier_moments(s, 2);
  const int sp = t.span();
  for (int a = -sp; a <= sp; ++a)
    for (int b = -sp; b <= sp; ++b)
      for (int c = -sp; c <= sp; ++c) {
        CHECK(std::abs(t(-a, -b, -c) - std::conj(t(a, b, c))) < 1e-15);
        CHECK(std::abs(t(a, b, c)) <= 1.0 + 1e-15);
        cd sum = 0.0;
        for (const auto& comp : s.components) {
          MeasureSpec one;
          one.kind = MeasureKind::mixture;
          one.components = {comp};
          one.components[0].weight = 1.0;
          sum += comp.weight * moment(one, a, b, c);
        }
        CHECK(std::abs(sum - t(a, b, c)) < 1e-15);
      }
  CHECK(std::abs(t(0, 0, 0) - 1.0) < 1e-15);
}

TEST_CASE("trigonometric polynomials integrate like a grid quadrature") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  const std::vector<MeasureSpec> specs = {MeasureSpec::lebesgue(), MeasureSpec::planes({{0, 0.0}, {1, 0.5}, {2, 0.25}})};
  for (const auto& spec : specs) {
    const auto s = normalize(spec);
    cd exact = 0.0, brute = 0.0;
    for (int a = -2; a <= 2; ++a)
      for (int b = -2; b <= 2; ++b)
        for (int c = -2; c <= 2; ++c) {
          const cd coef(g(rng), g(rng));
          exact += coef * moment(s, -a, -b, -c);
          brute += coef * grid_moment(s, -a, -b, -c, 24);
        }
    CHECK(std::abs(exact - brute) < (s.is_lebesgue() ? 1e-10 : 1e-8));
  }
}

TEST_CASE("gradient-mean check") {
  CHECK(check_gradient_mean_zero(MeasureSpec::lebesgue(), 4).holds);
  const auto plane = normalize(MeasureSpec::planes({{2, 0.3}}));
  const auto r = check_gradient_mean_zero(plane, 3);
  CHECK_FALSE(r.holds);
  // Worst case is j = 3, m = (0,0,3): 2 pi * 3.
  CHECK(r.worst_violation == doctest::Approx(kTwoPi * 3));
}

TEST_CASE("json round trip") {
  const auto s = MeasureSpec::planes({{0, 0.0}, {2, 0.5}});
  const auto j = to_json(s);
  CHECK(j["components"][1]["frozen_axes"][0] == 3);
  const auto back = measure_from_json(j);
  CHECK(back.components.size() == 2);
  CHECK(back.components[1].frozen_axes[0] == 2);
  CHECK(std::abs(moment(normalize(back), 0, 0, 1) - moment(normalize(s), 0, 0, 1)) < 1e-15);
  CHECK_THROWS_AS(measure_from_json(nlohmann::json{{"kind", "fractal"}}), ConfigError);
}
