#pragma once

#include <json.hpp>
#include <random>
#include <vector>

#include "homog/types.hpp"

namespace homog {

// Periodic real symmetric matrix coefficient as a Fourier series over [-NA, NA]^3.
class MaterialField {
 public:
  MaterialField() : MaterialField(Mat3::Identity()) {}
  explicit MaterialField(const Mat3& constant);
  MaterialField(int NA, std::vector<CMat3> coeffs);

  static MaterialField identity() { return MaterialField(Mat3::Identity()); }
  // (c0 + c1 cos 2 pi y_axis + s1 sin 2 pi y_axis) Id
  static MaterialField scalar_laminate(int axis, double c0, double c1, double s1 = 0.0);
  // prod_k (1 + amp cos(2 pi y_k + phase_k)) * scale * Id
  static MaterialField separable_trig(double scale, double amp, const Vec3& phases);
  // Random smooth SPD field with frequencies in [-1,1]^3; eigenvalues stay in about [lo, hi].
  static MaterialField random_spd(std::mt19937_64& rng, double lo, double hi, bool scalar = false);

  int cutoff() const { return NA_; }
  int width() const { return 2 * NA_ + 1; }
  const CMat3& coeff(int m1, int m2, int m3) const;
  const std::vector<CMat3>& coeffs() const { return coeffs_; }
  bool scalar() const { return scalar_; }

  Mat3 at(const Vec3& y) const;
  // Max deviation from the Hermitian pair rule A^(-m) = conj(A^(m)), with symmetric entries.
  double symmetry_defect() const;
  // Ellipticity bounds on a sampling grid with `samples` points per axis.
  std::pair<double, double> ellipticity(int samples = 24) const;
  void validate(int samples = 16) const;

  // Row i of (div A) A^{-1} convention: (div A)_i = sum_j d_j A_ji.
  Vec3 divergence_at(const Vec3& y) const;

  nlohmann::json to_json() const;
  static MaterialField from_json(const nlohmann::json& j);

 private:
  int NA_ = 0;
  std::vector<CMat3> coeffs_;
  bool scalar_ = true;
};

// Principal square root of an SPD 3x3 matrix.
Mat3 spd_sqrt(const Mat3& a);

// Pointwise square root on a collocation grid of `grid` points per axis (odd),
// re-expanded as a Fourier series interpolating the grid values.
MaterialField square_root_material(const MaterialField& a, int grid = 0);

}  // namespace homog
