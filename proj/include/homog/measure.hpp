#pragma once

#include <json.hpp>
#include <vector>

#include "homog/types.hpp"

namespace homog {

// One affine subspace of the unit cell: the axes in `frozen_axes` (0-based)
// are pinned at `offsets`, the remaining axes are free.
struct Subspace {
  std::vector<int> frozen_axes;
  std::vector<double> offsets;
  double weight = 1.0;

  int dimension() const { return 3 - static_cast<int>(frozen_axes.size()); }
  bool frozen(int axis) const;
  double offset(int axis) const;
};

enum class MeasureKind { lebesgue, arrangement, mixture };

struct MeasureSpec {
  MeasureKind kind = MeasureKind::lebesgue;
  std::vector<Subspace> components;
  double total_mass = 1.0;

  static MeasureSpec lebesgue();
  // Planes {y_axis = offset}, unit weight each, not normalized.
  static MeasureSpec planes(const std::vector<std::pair<int, double>>& planes);

  void validate() const;
  bool is_lebesgue() const;
};

MeasureSpec normalize(const MeasureSpec& spec);

// Moments mu^(m) = int exp(-2 pi i m.y) dmu for m in [-2N, 2N]^3.
class MomentTable {
 public:
  MomentTable() = default;
  MomentTable(int cutoff, std::vector<cd> data);

  int cutoff() const { return cutoff_; }
  int span() const { return 2 * cutoff_; }
  cd operator()(int m1, int m2, int m3) const;
  const std::vector<cd>& data() const { return data_; }

 private:
  int cutoff_ = 0;
  std::vector<cd> data_;
};

MomentTable fourier_moments(const MeasureSpec& spec, int cutoff);

// Closed-form moment of a single normalized spec at frequency m.
cd moment(const MeasureSpec& spec, int m1, int m2, int m3);

struct GradMeanReport {
  bool holds = true;
  double worst_violation = 0.0;
};

GradMeanReport check_gradient_mean_zero(const MeasureSpec& spec, int cutoff);

MeasureSpec measure_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MeasureSpec& spec);
nlohmann::json to_json(const MomentTable& table);

}  // namespace homog
