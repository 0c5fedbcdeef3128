#include "homog/fields.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace homog {

using RowMat = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

QuasiField QuasiField::zeros(int N, Rank rank, const Vec3& kappa) {
  QuasiField f;
  f.N = N;
  f.rank = rank;
  f.kappa = kappa;
  const int w = 2 * N + 1;
  f.coeffs = CVec::Zero(static_cast<int>(rank) * w * w * w);
  return f;
}

Vec3 reduce_kappa(const Vec3& kappa) {
  Vec3 r;
  for (int i = 0; i < 3; ++i) {
    double x = kappa(i) - kTwoPi * std::floor((kappa(i) + kPi) / kTwoPi);
    if (x >= kPi) x -= kTwoPi;
    if (x < -kPi) x += kTwoPi;
    r(i) = x;
  }
  return r;
}

namespace {

Vec3 wavevector(const Eigen::Vector3i& m, const Vec3& kappa) { return kTwoPi * m.cast<double>() + kappa; }

}  // namespace

QuasiField apply_shifted_operator(DiffOp op, const QuasiField& u) {
  const int w = u.width();
  QuasiField out;
  out.N = u.N;
  out.kappa = u.kappa;
  if (op == DiffOp::grad) {
    if (u.rank != Rank::scalar) throw RankMismatch("grad expects a scalar field");
    out = QuasiField::zeros(u.N, Rank::vector, u.kappa);
  } else if (op == DiffOp::curl) {
    if (u.rank != Rank::vector) throw RankMismatch("curl expects a vector field");
    out = QuasiField::zeros(u.N, Rank::vector, u.kappa);
  } else {
    if (u.rank != Rank::vector) throw RankMismatch("div expects a vector field");
    out = QuasiField::zeros(u.N, Rank::scalar, u.kappa);
  }
  for (int a = -u.N; a <= u.N; ++a)
    for (int b = -u.N; b <= u.N; ++b)
      for (int c = -u.N; c <= u.N; ++c) {
        const CVec3 ik = kI * wavevector(Eigen::Vector3i(a, b, c), u.kappa).cast<cd>();
        if (op == DiffOp::grad) {
          const cd s = u.at(0, a, b, c);
          for (int j = 0; j < 3; ++j) out.at(j, a, b, c) = ik(j) * s;
        } else {
          CVec3 v(u.at(0, a, b, c), u.at(1, a, b, c), u.at(2, a, b, c));
          if (op == DiffOp::curl) {
            CVec3 r = ik.cross(v);
            for (int j = 0; j < 3; ++j) out.at(j, a, b, c) = r(j);
          } else {
            out.at(0, a, b, c) = ik.transpose() * v;
          }
        }
      }
  (void)w;
  return out;
}

QuasiField multiply_material(const MaterialField& A, const QuasiField& u) {
  if (u.rank != Rank::vector) throw RankMismatch("multiply_material expects a vector field");
  QuasiField out = QuasiField::zeros(u.N, Rank::vector, u.kappa);
  const int NA = A.cutoff(), N = u.N;
  for (int a = -N; a <= N; ++a)
    for (int b = -N; b <= N; ++b)
      for (int c = -N; c <= N; ++c) {
        CVec3 s = CVec3::Zero();
        for (int p = -NA; p <= NA; ++p)
          for (int q = -NA; q <= NA; ++q)
            for (int r = -NA; r <= NA; ++r) {
              const int a2 = a - p, b2 = b - q, c2 = c - r;
              if (std::abs(a2) > N || std::abs(b2) > N || std::abs(c2) > N) continue;
              CVec3 v(u.at(0, a2, b2, c2), u.at(1, a2, b2, c2), u.at(2, a2, b2, c2));
              s += A.coeff(p, q, r) * v;
            }
        for (int j = 0; j < 3; ++j) out.at(j, a, b, c) = s(j);
      }
  return out;
}

cd inner_product(const QuasiField& u, const QuasiField& v, const MomentTable& mu) {
  if (u.rank != v.rank || u.N != v.N) throw RankMismatch("inner_product: incompatible fields");
  if (mu.cutoff() < u.N) throw CutoffTooSmall("moment table cutoff below field cutoff");
  const int N = u.N;
  cd s = 0.0;
  for (int comp = 0; comp < u.components(); ++comp)
    for (int a = -N; a <= N; ++a)
      for (int b = -N; b <= N; ++b)
        for (int c = -N; c <= N; ++c) {
          const cd um = u.at(comp, a, b, c);
          if (um == 0.0) continue;
          for (int d = -N; d <= N; ++d)
            for (int e = -N; e <= N; ++e)
              for (int f = -N; f <= N; ++f) {
                const cd vn = v.at(comp, d, e, f);
                if (vn == 0.0) continue;
                s += um * std::conj(vn) * mu(d - a, e - b, f - c);
              }
        }
  return s;
}

GramOperator::GramOperator(const MomentTable& mu, int N, double threshold) : threshold_(threshold) {
  if (mu.cutoff() < N) throw CutoffTooSmall("moment table cutoff below Gram cutoff");
  const int w = 2 * N + 1, n = w * w * w;
  G_.resize(n, n);
  auto m_of = [&](int i) { return Eigen::Vector3i(i / (w * w) - N, (i / w) % w - N, i % w - N); };
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3i mi = m_of(i);
    for (int j = 0; j < n; ++j) {
      Eigen::Vector3i nj = m_of(j);
      G_(i, j) = mu(nj(0) - mi(0), nj(1) - mi(1), nj(2) - mi(2));
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G_);
  evals_ = es.eigenvalues();
  evecs_ = es.eigenvectors();
  const double cut = threshold * lambda_max();
  rank_ = 0;
  for (int i = 0; i < evals_.size(); ++i)
    if (evals_(i) > cut) ++rank_;
}

// ---------------------------------------------------------------- Space

Space::Space(const MeasureSpec& mu, int N, int P, int NA) : mu_(normalize(mu)), N_(N), L_(1) {
  if (N < 0) throw CutoffTooSmall("negative cutoff");
  P_ = P > 0 ? P : default_nodes(N, NA);
  if (P_ <= 2 * N) throw CutoffTooSmall("node count must exceed 2N for exact Gram integrals");
  for (int m = -N; m <= N; ++m) freqs_.push_back(m);
  build();
}

Space::Space(const MeasureSpec& mu, std::vector<int> freqs, int L, int P)
    : mu_(normalize(mu)), freqs_(std::move(freqs)), L_(L), P_(P) {
  int kmax = 0;
  for (int k : freqs_) kmax = std::max(kmax, std::abs(k));
  N_ = kmax;
  if (L_ * P_ <= 2 * kmax) throw CutoffTooSmall("node count must exceed twice the band");
  build();
}

void Space::build() {
  const int f = nf();
  for (int i = 0; i < f; ++i)
    if (freqs_[i] == 0) zero_ = (i * f + i) * f + i;
  blocks_.clear();
  Q_ = 0;
  std::vector<double> wts;
  pts_.clear();
  for (const auto& comp : mu_.components) {
    Block b;
    b.offset = Q_;
    int free_axes = 0;
    std::array<std::vector<double>, 3> coords;
    for (int ax = 0; ax < 3; ++ax) {
      if (comp.frozen(ax)) {
        for (int p = 0; p < L_; ++p) coords[ax].push_back(comp.offset(ax) + p);
      } else {
        ++free_axes;
        for (int p = 0; p < L_ * P_; ++p) coords[ax].push_back(double(p) / P_);
      }
      b.shape[ax] = static_cast<int>(coords[ax].size());
      b.E[ax].resize(b.shape[ax], f);
      for (int p = 0; p < b.shape[ax]; ++p)
        for (int k = 0; k < f; ++k) b.E[ax](p, k) = std::polar(1.0, kTwoPi * freqs_[k] * coords[ax][p] / L_);
      b.EH[ax] = b.E[ax].adjoint();
    }
    b.weight = comp.weight / (std::pow(double(P_), free_axes) * std::pow(double(L_), 3));
    const int count = b.shape[0] * b.shape[1] * b.shape[2];
    for (int i = 0; i < b.shape[0]; ++i)
      for (int j = 0; j < b.shape[1]; ++j)
        for (int k = 0; k < b.shape[2]; ++k) {
          pts_.emplace_back(coords[0][i], coords[1][j], coords[2][k]);
          wts.push_back(b.weight);
        }
    Q_ += count;
    blocks_.push_back(std::move(b));
  }
  w_ = Eigen::Map<RVec>(wts.data(), static_cast<int>(wts.size()));
  ell_ = test(CVec::Ones(Q_), 1).conjugate();
}

namespace {

// out(e0,e1,e2) = sum M0(e0,d0) M1(e1,d1) M2(e2,d2) in(d0,d1,d2), row-major tensors.
void separable(const cd* in, const std::array<int, 3>& d, const Eigen::MatrixXcd& M0, const Eigen::MatrixXcd& M1,
               const Eigen::MatrixXcd& M2, cd* out) {
  const int e0 = static_cast<int>(M0.rows()), e1 = static_cast<int>(M1.rows()), e2 = static_cast<int>(M2.rows());
  Eigen::Map<const RowMat> X(in, d[0] * d[1], d[2]);
  RowMat T1 = X * M2.transpose();  // (d0 d1) x e2
  RowMat T2(d[0], e1 * e2);
  for (int i = 0; i < d[0]; ++i) {
    RowMat blk = M1 * T1.middleRows(i * d[1], d[1]);  // e1 x e2
    T2.row(i) = Eigen::Map<const Eigen::Matrix<cd, 1, Eigen::Dynamic>>(blk.data(), e1 * e2);
  }
  Eigen::Map<RowMat> Y(out, e0, e1 * e2);
  Y.noalias() = M0 * T2;
}

}  // namespace

CVec Space::eval(const CVec& coeffs, int ncomp) const {
  const int n = nc();
  if (coeffs.size() != ncomp * n) throw RankMismatch("eval: coefficient size mismatch");
  CVec out(ncomp * Q_);
  const std::array<int, 3> d{nf(), nf(), nf()};
  for (int c = 0; c < ncomp; ++c)
    for (const auto& b : blocks_) separable(coeffs.data() + c * n, d, b.E[0], b.E[1], b.E[2], out.data() + c * Q_ + b.offset);
  return out;
}

CVec Space::test(const CVec& nodal, int ncomp) const {
  const int n = nc();
  if (nodal.size() != ncomp * Q_) throw RankMismatch("test: nodal size mismatch");
  CVec out = CVec::Zero(ncomp * n);
  CVec tmp(n);
  for (int c = 0; c < ncomp; ++c)
    for (const auto& b : blocks_) {
      separable(nodal.data() + c * Q_ + b.offset, b.shape, b.EH[0], b.EH[1], b.EH[2], tmp.data());
      out.segment(c * n, n) += b.weight * tmp;
    }
  return out;
}

Eigen::Vector3i Space::freq(int idx) const {
  const int f = nf();
  return Eigen::Vector3i(freqs_[idx / (f * f)], freqs_[(idx / f) % f], freqs_[idx % f]);
}

Vec3 Space::wave(int idx, const Vec3& kappa) const {
  return (kTwoPi / L_) * freq(idx).cast<double>() + kappa;
}

CVec Space::grad(const CVec& phi, const Vec3& kappa) const {
  const int n = nc();
  CVec out(3 * n);
  for (int i = 0; i < n; ++i) {
    const Vec3 k = wave(i, kappa);
    for (int j = 0; j < 3; ++j) out(j * n + i) = kI * k(j) * phi(i);
  }
  return out;
}

CVec Space::curl(const CVec& u, const Vec3& kappa) const {
  const int n = nc();
  CVec out(3 * n);
  for (int i = 0; i < n; ++i) {
    const Vec3 k = wave(i, kappa);
    const cd u0 = u(i), u1 = u(n + i), u2 = u(2 * n + i);
    out(i) = kI * (k(1) * u2 - k(2) * u1);
    out(n + i) = kI * (k(2) * u0 - k(0) * u2);
    out(2 * n + i) = kI * (k(0) * u1 - k(1) * u0);
  }
  return out;
}

CVec Space::div(const CVec& u, const Vec3& kappa) const {
  const int n = nc();
  CVec out(n);
  for (int i = 0; i < n; ++i) {
    const Vec3 k = wave(i, kappa);
    out(i) = kI * (k(0) * u(i) + k(1) * u(n + i) + k(2) * u(2 * n + i));
  }
  return out;
}

cd Space::integrate(const CVec& v) const { return (w_.cast<cd>().array() * v.array()).sum(); }

CVec3 Space::integrate3(const CVec& v) const {
  CVec3 r;
  for (int c = 0; c < 3; ++c) r(c) = integrate(v.segment(c * Q_, Q_));
  return r;
}

CMat3 Space::integrate_mat(const std::vector<Mat3>& m) const {
  Mat3 s = Mat3::Zero();
  for (int q = 0; q < Q_; ++q) s += w_(q) * m[q];
  return s.cast<cd>();
}

cd Space::inner(const CVec& a, const CVec& b) const {
  const int nc_ = static_cast<int>(a.size() / Q_);
  cd s = 0.0;
  for (int c = 0; c < nc_; ++c)
    s += (w_.cast<cd>().array() * a.segment(c * Q_, Q_).array() * b.segment(c * Q_, Q_).conjugate().array()).sum();
  return s;
}

NodalMaterial Space::material(const MaterialField& a) const {
  NodalMaterial m;
  m.values.resize(Q_);
  m.scalar = a.scalar();
  m.lam_min = 1e300;
  m.lam_max = 0.0;
  for (int q = 0; q < Q_; ++q) {
    m.values[q] = a.at(pts_[q]);
    Eigen::SelfAdjointEigenSolver<Mat3> es(m.values[q], Eigen::EigenvaluesOnly);
    m.lam_min = std::min(m.lam_min, es.eigenvalues()(0));
    m.lam_max = std::max(m.lam_max, es.eigenvalues()(2));
  }
  if (m.lam_min <= 0.0) throw NotPositiveDefinite("material not positive definite at a quadrature node");
  return m;
}

CVec Space::apply(const NodalMaterial& m, const CVec& v) const {
  CVec out(3 * Q_);
  for (int q = 0; q < Q_; ++q) {
    const Mat3& a = m.values[q];
    const cd x = v(q), y = v(Q_ + q), z = v(2 * Q_ + q);
    out(q) = a(0, 0) * x + a(0, 1) * y + a(0, 2) * z;
    out(Q_ + q) = a(1, 0) * x + a(1, 1) * y + a(1, 2) * z;
    out(2 * Q_ + q) = a(2, 0) * x + a(2, 1) * y + a(2, 2) * z;
  }
  return out;
}

CVec Space::constant_nodal(const CVec3& c) const {
  CVec out(3 * Q_);
  for (int j = 0; j < 3; ++j) out.segment(j * Q_, Q_).setConstant(c(j));
  return out;
}

int Space::index(int m1, int m2, int m3) const {
  if (L_ != 1) throw RankMismatch("index() is defined for the unit-cell space only");
  const int w = 2 * N_ + 1;
  return ((m1 + N_) * w + (m2 + N_)) * w + (m3 + N_);
}

CVec Space::to_nodal(const QuasiField& u) const {
  if (L_ != 1 || u.N != N_) throw RankMismatch("to_nodal: cutoff mismatch");
  return eval(u.coeffs, u.components());
}

Medium Medium::build(const Space& s, const MaterialField& a) {
  Medium m;
  m.field = a;
  m.A = s.material(a);
  m.Ainv = m.Ahalf = m.Aminushalf = m.A;
  for (int q = 0; q < s.Q(); ++q) {
    const Mat3& x = m.A.values[q];
    Eigen::SelfAdjointEigenSolver<Mat3> es(x);
    const Mat3& V = es.eigenvectors();
    const Vec3 l = es.eigenvalues();
    m.Ainv.values[q] = V * l.cwiseInverse().asDiagonal() * V.transpose();
    m.Ahalf.values[q] = V * l.cwiseSqrt().asDiagonal() * V.transpose();
    m.Aminushalf.values[q] = V * l.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
  }
  auto bounds = [&](NodalMaterial& n) {
    n.lam_min = 1e300;
    n.lam_max = 0.0;
    for (const auto& v : n.values) {
      Eigen::SelfAdjointEigenSolver<Mat3> es(v, Eigen::EigenvaluesOnly);
      n.lam_min = std::min(n.lam_min, es.eigenvalues()(0));
      n.lam_max = std::max(n.lam_max, es.eigenvalues()(2));
    }
  };
  bounds(m.Ainv);
  bounds(m.Ahalf);
  bounds(m.Aminushalf);
  return m;
}

bool Medium::identity() const {
  for (const auto& v : A.values)
    if (!v.isIdentity(0.0)) return false;
  return true;
}

}  // namespace homog
