#include "homog/material.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace homog {

namespace {

int idx(int NA, int m1, int m2, int m3) {
  const int w = 2 * NA + 1;
  return ((m1 + NA) * w + (m2 + NA)) * w + (m3 + NA);
}

bool is_scalar_matrix(const CMat3& m) {
  const double tol = 1e-15 * (1.0 + m.norm());
  CMat3 off = m - m(0, 0) * CMat3::Identity();
  return off.norm() <= tol;
}

}  // namespace

MaterialField::MaterialField(const Mat3& constant) : NA_(0), coeffs_{constant.cast<cd>()} {
  scalar_ = is_scalar_matrix(coeffs_[0]);
}

MaterialField::MaterialField(int NA, std::vector<CMat3> coeffs) : NA_(NA), coeffs_(std::move(coeffs)) {
  const std::size_t w = 2 * NA + 1;
  if (coeffs_.size() != w * w * w) throw InvalidSpec("material coefficient array has wrong size");
  scalar_ = true;
  for (const auto& c : coeffs_) scalar_ = scalar_ && is_scalar_matrix(c);
}

const CMat3& MaterialField::coeff(int m1, int m2, int m3) const { return coeffs_[idx(NA_, m1, m2, m3)]; }

MaterialField MaterialField::scalar_laminate(int axis, double c0, double c1, double s1) {
  std::vector<CMat3> c(27, CMat3::Zero());
  int mp[3] = {0, 0, 0}, mm[3] = {0, 0, 0};
  mp[axis] = 1;
  mm[axis] = -1;
  c[idx(1, 0, 0, 0)] = c0 * CMat3::Identity();
  // c1 cos t + s1 sin t = (c1 - i s1)/2 e^{it} + (c1 + i s1)/2 e^{-it}
  c[idx(1, mp[0], mp[1], mp[2])] = cd(0.5 * c1, -0.5 * s1) * CMat3::Identity();
  c[idx(1, mm[0], mm[1], mm[2])] = cd(0.5 * c1, 0.5 * s1) * CMat3::Identity();
  return MaterialField(1, std::move(c));
}

MaterialField MaterialField::separable_trig(double scale, double amp, const Vec3& phases) {
  // Each factor 1 + amp cos(2 pi y + p) has coefficients {0: 1, +1: amp e^{ip}/2, -1: amp e^{-ip}/2}.
  auto factor = [&](int k, int m) -> cd {
    if (m == 0) return 1.0;
    return 0.5 * amp * std::polar(1.0, m * phases(k));
  };
  std::vector<CMat3> c(27, CMat3::Zero());
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b)
      for (int d = -1; d <= 1; ++d)
        c[idx(1, a, b, d)] = scale * factor(0, a) * factor(1, b) * factor(2, d) * CMat3::Identity();
  return MaterialField(1, std::move(c));
}

MaterialField MaterialField::random_spd(std::mt19937_64& rng, double lo, double hi, bool scalar) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double lam_lo = lo * 1.5, lam_hi = hi / 1.4;
  Mat3 s0;
  double lam_min;
  if (scalar) {
    lam_min = lam_lo + (lam_hi - lam_lo) * uni(rng);
    s0 = lam_min * Mat3::Identity();
  } else {
    Mat3 g;
    for (int i = 0; i < 9; ++i) g(i / 3, i % 3) = gauss(rng);
    Eigen::HouseholderQR<Mat3> qr(g);
    Mat3 q = qr.householderQ();
    Vec3 lam;
    for (int i = 0; i < 3; ++i) lam(i) = lam_lo + (lam_hi - lam_lo) * uni(rng);
    s0 = q * lam.asDiagonal() * q.transpose();
    lam_min = lam.minCoeff();
  }
  std::vector<CMat3> c(27, CMat3::Zero());
  c[idx(1, 0, 0, 0)] = s0.cast<cd>();
  double total = 0.0;
  std::vector<std::array<int, 3>> half;
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b)
      for (int d = -1; d <= 1; ++d) {
        if (a > 0 || (a == 0 && b > 0) || (a == 0 && b == 0 && d > 0)) half.push_back({a, b, d});
      }
  std::vector<CMat3> raw;
  for (std::size_t h = 0; h < half.size(); ++h) {
    CMat3 x;
    if (scalar) {
      x = cd(gauss(rng), gauss(rng)) * CMat3::Identity();
    } else {
      for (int i = 0; i < 9; ++i) x(i / 3, i % 3) = cd(gauss(rng), gauss(rng));
      x = 0.5 * (x + x.transpose()).eval();
    }
    raw.push_back(x);
    // A pair contributes 2 Re(C e^{it}); its spectral norm is bounded by 2 |C|_F.
    total += 2.0 * x.norm();
  }
  const double budget = lam_min / 3.0;
  for (std::size_t h = 0; h < half.size(); ++h) {
    CMat3 x = raw[h] * (budget / total);
    auto [a, b, d] = half[h];
    c[idx(1, a, b, d)] = x;
    c[idx(1, -a, -b, -d)] = x.conjugate();
  }
  return MaterialField(1, std::move(c));
}

Mat3 MaterialField::at(const Vec3& y) const {
  CMat3 s = CMat3::Zero();
  const int w = width();
  for (int a = -NA_; a <= NA_; ++a)
    for (int b = -NA_; b <= NA_; ++b)
      for (int d = -NA_; d <= NA_; ++d) {
        const CMat3& c = coeffs_[((a + NA_) * w + (b + NA_)) * w + (d + NA_)];
        if (c.isZero(0.0)) continue;
        s += c * std::polar(1.0, kTwoPi * (a * y(0) + b * y(1) + d * y(2)));
      }
  Mat3 r = s.real();
  return 0.5 * (r + r.transpose());
}

Vec3 MaterialField::divergence_at(const Vec3& y) const {
  CMat3 grad[3] = {CMat3::Zero(), CMat3::Zero(), CMat3::Zero()};
  const int w = width();
  for (int a = -NA_; a <= NA_; ++a)
    for (int b = -NA_; b <= NA_; ++b)
      for (int d = -NA_; d <= NA_; ++d) {
        const CMat3& c = coeffs_[((a + NA_) * w + (b + NA_)) * w + (d + NA_)];
        if (c.isZero(0.0)) continue;
        const cd e = std::polar(1.0, kTwoPi * (a * y(0) + b * y(1) + d * y(2)));
        const int m[3] = {a, b, d};
        for (int j = 0; j < 3; ++j) grad[j] += (kI * kTwoPi * double(m[j]) * e) * c;
      }
  Vec3 div;
  for (int i = 0; i < 3; ++i) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) s += grad[j](j, i).real();
    div(i) = s;
  }
  return div;
}

double MaterialField::symmetry_defect() const {
  double worst = 0.0;
  for (int a = -NA_; a <= NA_; ++a)
    for (int b = -NA_; b <= NA_; ++b)
      for (int d = -NA_; d <= NA_; ++d) {
        const CMat3& p = coeff(a, b, d);
        const CMat3& q = coeff(-a, -b, -d);
        worst = std::max(worst, (p - q.conjugate()).norm());
        worst = std::max(worst, (p - p.transpose()).norm());
      }
  return worst;
}

std::pair<double, double> MaterialField::ellipticity(int samples) const {
  double lo = 1e300, hi = 0.0;
  for (int i = 0; i < samples; ++i)
    for (int j = 0; j < samples; ++j)
      for (int k = 0; k < samples; ++k) {
        Vec3 y(double(i) / samples, double(j) / samples, double(k) / samples);
        Eigen::SelfAdjointEigenSolver<Mat3> es(at(y), Eigen::EigenvaluesOnly);
        lo = std::min(lo, es.eigenvalues()(0));
        hi = std::max(hi, es.eigenvalues()(2));
      }
  return {lo, hi};
}

void MaterialField::validate(int samples) const {
  if (symmetry_defect() > 1e-12) throw InvalidSpec("material coefficients are not Hermitian-paired symmetric");
  for (const auto& c : coeffs_)
    if (!c.allFinite()) throw InvalidSpec("material coefficient is not finite");
  if (ellipticity(samples).first <= 0.0) throw NotPositiveDefinite("material is not positive definite");
}

nlohmann::json MaterialField::to_json() const {
  nlohmann::json j;
  j["cutoff"] = NA_;
  auto& arr = j["coeffs"] = nlohmann::json::array();
  for (int a = -NA_; a <= NA_; ++a)
    for (int b = -NA_; b <= NA_; ++b)
      for (int d = -NA_; d <= NA_; ++d) {
        const CMat3& c = coeff(a, b, d);
        if (c.isZero(0.0)) continue;
        nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
        for (int r = 0; r < 3; ++r)
          for (int s = 0; s < 3; ++s) {
            re.push_back(c(r, s).real());
            im.push_back(c(r, s).imag());
          }
        arr.push_back({{"m", {a, b, d}}, {"re", re}, {"im", im}});
      }
  return j;
}

MaterialField MaterialField::from_json(const nlohmann::json& j) {
  const int NA = j.at("cutoff").get<int>();
  const int w = 2 * NA + 1;
  std::vector<CMat3> c(static_cast<std::size_t>(w) * w * w, CMat3::Zero());
  for (const auto& e : j.at("coeffs")) {
    auto m = e.at("m").get<std::array<int, 3>>();
    auto re = e.at("re").get<std::vector<double>>();
    auto im = e.value("im", std::vector<double>(9, 0.0));
    if (re.size() != 9 || im.size() != 9) throw ConfigError("material entry needs 9 values");
    for (int k = 0; k < 3; ++k)
      if (std::abs(m[k]) > NA) throw ConfigError("material frequency exceeds cutoff");
    CMat3 x;
    for (int r = 0; r < 9; ++r) x(r / 3, r % 3) = cd(re[r], im[r]);
    c[idx(NA, m[0], m[1], m[2])] = x;
  }
  MaterialField f(NA, std::move(c));
  f.validate();
  return f;
}

Mat3 spd_sqrt(const Mat3& a) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(a);
  if (es.eigenvalues()(0) <= 0.0) throw NotPositiveDefinite("matrix square root of a non-SPD matrix");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

MaterialField square_root_material(const MaterialField& a, int grid) {
  if (grid <= 0) grid = 4 * a.cutoff() + 9;
  if (grid % 2 == 0) ++grid;
  if (grid < 2 * a.cutoff() + 1) throw CutoffTooSmall("collocation grid smaller than material band");
  const int h = (grid - 1) / 2;
  std::vector<Mat3> vals(static_cast<std::size_t>(grid) * grid * grid);
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j)
      for (int k = 0; k < grid; ++k)
        vals[(i * grid + j) * grid + k] = spd_sqrt(a.at(Vec3(double(i) / grid, double(j) / grid, double(k) / grid)));
  // Separable DFT, axis by axis.
  Eigen::MatrixXcd F(grid, grid);
  for (int m = -h; m <= h; ++m)
    for (int p = 0; p < grid; ++p) F(m + h, p) = std::polar(1.0 / grid, -kTwoPi * m * p / grid);
  const std::size_t n = static_cast<std::size_t>(grid) * grid * grid;
  std::vector<CMat3> cur(n), nxt(n);
  for (std::size_t q = 0; q < n; ++q) cur[q] = vals[q].cast<cd>();
  for (int axis = 0; axis < 3; ++axis) {
    for (int i = 0; i < grid; ++i)
      for (int j = 0; j < grid; ++j)
        for (int k = 0; k < grid; ++k) {
          CMat3 s = CMat3::Zero();
          for (int p = 0; p < grid; ++p) {
            int src[3] = {i, j, k};
            src[axis] = p;
            const int dst[3] = {i, j, k};
            s += F(dst[axis], p) * cur[(src[0] * grid + src[1]) * grid + src[2]];
          }
          nxt[(i * grid + j) * grid + k] = s;
        }
    std::swap(cur, nxt);
  }
  MaterialField out(h, std::move(cur));
  return out;
}

}  // namespace homog
