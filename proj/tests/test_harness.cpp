#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "homog/harness.hpp"

using namespace homog;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("homog_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SweepConfig small_config(const std::string& preset) {
  SweepConfig c;
  c.preset = preset;
  c.N = 2;
  c.eps_list = {0.25, 0.125};
  c.grid.kappa_axis = {kPi / 6};
  c.threads = 1;
  return c;
}

}  // namespace

TEST_CASE("rate fitting") {
  const std::vector<double> eps = {0.25, 0.125, 0.0625, 0.03125};
  std::vector<double> lin, quad, jit;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (double e : eps) {
    lin.push_back(e);
    quad.push_back(3 * e * e);
    jit.push_back(0.7 * e * std::exp(u(rng)));
  }
  const RateFit a = fit_rate(eps, lin);
  CHECK(a.slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.C == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit_rate(eps, quad).slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(fit_rate(eps, jit).slope - 1.0) < 0.05);
  std::vector<double> z = lin;
  z[2] = 0.0;
  CHECK_THROWS_AS(fit_rate(eps, z), DegenerateFit);
  CHECK_THROWS_AS(fit_rate({0.1}, {0.1}), DegenerateFit);
}

TEST_CASE("sweep config validation") {
  SweepConfig c;
  CHECK_NOTHROW(c.validate());
  const SweepConfig back = SweepConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  json j = c.to_json();
  j["eps_list"] = {0.125, 0.25};
  CHECK_THROWS_AS(SweepConfig::from_json(j), ConfigError);
  j["eps_list"] = {0.75, 0.25};
  CHECK_THROWS_AS(SweepConfig::from_json(j), ConfigError);
  j = c.to_json();
  j["theta_grid"]["kappa_axis"] = {0.0, 1.0};
  CHECK_THROWS_AS(SweepConfig::from_json(j), ConfigError);
  j = c.to_json();
  j["preset"] = "nonsense";
  CHECK_THROWS_AS(SweepConfig::from_json(j), ConfigError);
  j = c.to_json();
  j["N"] = "six";
  CHECK_THROWS_AS(SweepConfig::from_json(j), ConfigError);
  for (const auto& name : preset_names()) CHECK_NOTHROW(preset(name));
}

TEST_CASE("content-addressed cache") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const fs::path root = scratch("cache");
  ResultCache cache(root);
  const json in = {{"kind", "x"}, {"eps", 0.25}};
  const std::string k = ResultCache::key(in);
  CHECK(k.size() == 64);
  CHECK_FALSE(cache.get(k).has_value());
  const json v = {{"err", 0.1234567890123456789}};
  cache.put(k, v);
  const auto hit = cache.get(k);
  REQUIRE(hit.has_value());
  CHECK(*hit == v);
  CHECK(hit->at("err").get<double>() == v.at("err").get<double>());
  ResultCache off(root, false);
  CHECK_FALSE(off.get(k).has_value());
  int leftovers = 0;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.path().string().find(".tmp") != std::string::npos) ++leftovers;
  CHECK(leftovers == 0);
}

TEST_CASE("parallel_for keeps the order") {
  std::vector<int> out(50, -1);
  parallel_for(50, 3, [&](int i) { out[i] = i * i; });
  for (int i = 0; i < 50; ++i) CHECK(out[i] == i * i);
  CHECK_THROWS_AS(parallel_for(5, 2, [](int i) {
                    if (i == 3) throw SolverDiverged("x");
                  }),
                  SolverDiverged);
}

TEST_CASE("check diagnostics") {
  SweepConfig c = small_config("identity");
  RunResult r = run_check(c);
  CHECK(r.exit_code == 0);
  for (const json& i : r.summary.at("items")) CHECK(i.at("pass").get<bool>());

  // (2 pi c1) / sqrt(c0^2 - c1^2) = 0.7 for the laminate c0 + c1 cos 2 pi y1.
  const double t = 0.7 / kTwoPi;
  const double c1 = 2.0 * t / std::sqrt(1.0 + t * t);
  c.A = MaterialField::scalar_laminate(0, 2.0, c1);
  r = run_check(c);
  CHECK(r.exit_code != 0);
  for (const json& i : r.summary.at("items"))
    if (i.at("name") == "grad_A_bound") {
      CHECK_FALSE(i.at("pass").get<bool>());
      CHECK(i.at("value").get<double>() == doctest::Approx(0.7).epsilon(1e-3));
    }

  r = run_check(small_config("plane-grid"));
  for (const json& i : r.summary.at("items"))
    if (i.at("name") == "gram_rank") {
      CHECK(i.at("value").at("deficit").get<int>() > 0);
      CHECK(i.at("value").at("rank").get<int>() > 0);
    }
}

TEST_CASE("sweep determinism, cache and exit codes") {
  const fs::path root = scratch("sweep_cache");
  setenv("HOMOG_CACHE_DIR", root.c_str(), 1);
  SweepConfig c = small_config("laminate");
  const RunResult cold = run_sweep(c);
  const RunResult warm = run_sweep(c);
  CHECK(cold.summary.dump() == warm.summary.dump());
  c.use_cache = false;
  const RunResult fresh = run_sweep(c);
  CHECK(fresh.summary.dump() == cold.summary.dump());
  CHECK(cold.reports.size() == 2);

  const fs::path out = scratch("sweep_out");
  write_outputs(out, cold);
  for (const char* f : {"summary.json", "reports.jsonl", "tensors.json", "reports.csv", "rates.csv"})
    CHECK(fs::exists(out / f));
  std::ifstream in(out / "summary.json");
  CHECK(json::parse(in) == cold.summary);

  SweepConfig ic = small_config("identity");
  ic.current = "mean";
  const RunResult id = run_sweep(ic);
  CHECK(id.exit_code == 0);
  CHECK(id.summary.at("channels").at("err_D").at("verdict") == "exact");
  unsetenv("HOMOG_CACHE_DIR");
}

TEST_CASE("cell and floquet runs") {
  SweepConfig c = small_config("laminate");
  c.use_cache = false;
  const RunResult cell = run_cell(c);
  CHECK(cell.exit_code == 0);
  CHECK(cell.tensors.at("A_hat").size() == 2);
  const RunResult fl = run_floquet(c);
  CHECK(fl.summary.at("direct_integral").at("pass").get<bool>());
  CHECK(fl.summary.at("tail").at("pass").get<bool>());
  CHECK(fl.exit_code == 0);
}
