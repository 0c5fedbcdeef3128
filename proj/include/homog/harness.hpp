#pragma once

#include <filesystem>
#include <functional>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "homog/floquet.hpp"

namespace homog {

using json = nlohmann::json;

struct Preset {
  std::string name;
  MeasureSpec mu;
  MaterialField A, At;
  Branch branch = Branch::unit_permeability;
};
Preset preset(const std::string& name);
std::vector<std::string> preset_names();
std::string to_string(Branch b);
Branch branch_from_string(const std::string& s);

// theta = kappa / eps with kappa on a fixed per-axis lattice, so the current and
// the cell problems stay the same along the eps ladder.
struct ThetaGrid {
  std::vector<double> kappa_axis = {-kPi / 2, kPi / 6, 5 * kPi / 6};
  std::vector<Vec3> kappas() const;
  std::vector<Vec3> thetas(double eps) const;
};

struct SweepConfig {
  std::string preset = "laminate";
  std::vector<double> eps_list = {1.0 / 4, 1.0 / 8, 1.0 / 16, 1.0 / 32};
  ThetaGrid grid;
  int N = 4;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::optional<Branch> branch;  // preset default when empty
  bool literal = false;
  std::string current = "random";  // random | mean
  int band = 1;
  int threads = 0;  // 0: hardware concurrency
  bool use_cache = true;
  // Optional overrides of the preset.
  std::optional<MeasureSpec> measure;
  std::optional<MaterialField> A, At;

  void validate() const;
  json to_json() const;
  static SweepConfig from_json(const json& j);
  Preset resolved() const;
  Branch resolved_branch() const;
};

struct RateFit {
  double slope = 0.0;
  double C = 0.0;          // max err / eps
  double intercept = 0.0;  // log err = intercept + slope log eps
  double r2 = 0.0;
  int points = 0;
};
// Least squares in log-log; DegenerateFit when an error is zero or fewer than two distinct eps.
RateFit fit_rate(const std::vector<double>& eps, const std::vector<double>& err);
json to_json(const RateFit& f);

// Content-addressed store: key = SHA-256 of the canonical JSON of the inputs.
class ResultCache {
 public:
  // Root from HOMOG_CACHE_DIR, else $XDG_CACHE_HOME/homog, else $HOME/.cache/homog.
  static std::filesystem::path default_root();
  explicit ResultCache(std::filesystem::path root = default_root(), bool enabled = true);
  static std::string key(const json& inputs);
  std::optional<json> get(const std::string& key) const;
  void put(const std::string& key, const json& value) const;
  const std::filesystem::path& root() const { return root_; }
  bool enabled() const { return enabled_; }

 private:
  std::filesystem::path root_;
  bool enabled_;
};

std::string sha256_hex(const std::string& data);

// Ordered results; tasks run on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& task);

json report_json(const FibreReport& r);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
std::string csv(const Table& t);

struct RunResult {
  json summary;
  std::vector<json> reports;
  json tensors;
  std::vector<std::pair<std::string, Table>> tables;
  int exit_code = 0;
};
// summary.json, reports.jsonl, tensors.json and one CSV per table.
void write_outputs(const std::filesystem::path& dir, const RunResult& r);

RunResult run_check(const SweepConfig& c);
RunResult run_cell(const SweepConfig& c);
RunResult run_fibre(const SweepConfig& c);
RunResult run_sweep(const SweepConfig& c);
RunResult run_floquet(const SweepConfig& c);

}  // namespace homog
