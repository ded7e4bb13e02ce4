#pragma once

// Lorentz-model geometry on plain Eigen vectors.
//
// A point of the n-dimensional model is an (n+1)-vector whose coordinate 0 is
// the time axis and coordinates 1..n are the spatial axes. Points satisfy
// <x, x>_L = 1/K with x_t > 0 for a curvature K < 0.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace hybo::lorentz {

template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Curvature {
 public:
  explicit Curvature(double k = -1.0) : k_(k) {
    if (!(k < 0.0) || !std::isfinite(k)) throw GeometryError("curvature must be a finite negative number");
  }
  double value() const noexcept { return k_; }
  template <typename T>
  T k() const noexcept {
    return static_cast<T>(k_);
  }
  // 1/K
  template <typename T>
  T inv() const noexcept {
    return static_cast<T>(1.0 / k_);
  }
  // sqrt(-K)
  template <typename T>
  T sqrt_neg() const noexcept {
    return static_cast<T>(std::sqrt(-k_));
  }

 private:
  double k_;
};

// Tolerances: construction, invariant checks, roundtrips.
inline constexpr double kConstructionTol = 1e-12;
inline constexpr double kInvariantTol = 1e-9;
inline constexpr double kRoundtripTol = 1e-8;
// exp_map returns its base point below this tangent norm.
inline constexpr double kTinyTangent = 1e-8;

template <typename T>
T lorentz_inner(const Vec<T>& x, const Vec<T>& y) {
  if (x.size() != y.size()) {
    throw GeometryError("lorentz_inner: length mismatch " + std::to_string(x.size()) + " vs " +
                        std::to_string(y.size()));
  }
  if (x.size() < 2) throw GeometryError("lorentz_inner: vectors need at least 2 coordinates");
  const Eigen::Index n = x.size() - 1;
  return -x(0) * y(0) + x.tail(n).dot(y.tail(n));
}

// sqrt(<z,z>_L) for space-like z, 0 otherwise.
template <typename T>
T lorentz_norm(const Vec<T>& z) {
  const T s = lorentz_inner(z, z);
  return s > T(0) ? std::sqrt(s) : T(0);
}

template <typename T>
Vec<T> origin(Eigen::Index n, Curvature K = Curvature()) {
  Vec<T> o = Vec<T>::Zero(n + 1);
  o(0) = std::sqrt(-K.inv<T>());
  return o;
}

// Absolute violation of the hyperboloid constraint.
template <typename T>
T manifold_error(const Vec<T>& x, Curvature K = Curvature()) {
  return std::abs(lorentz_inner(x, x) - K.inv<T>());
}

template <typename T>
bool on_manifold(const Vec<T>& x, Curvature K = Curvature(), double tol = kInvariantTol) {
  return x.size() >= 2 && x(0) > T(0) && static_cast<double>(manifold_error(x, K)) < tol;
}

template <typename T>
Vec<T> project_to_hyperboloid(const Vec<T>& spatial, Curvature K = Curvature()) {
  Vec<T> x(spatial.size() + 1);
  x(0) = std::sqrt(spatial.squaredNorm() - K.inv<T>());
  x.tail(spatial.size()) = spatial;
  return x;
}

// Removes the component of u along x: u - K <x,u>_L x.
template <typename T>
Vec<T> project_to_tangent(const Vec<T>& x, const Vec<T>& u, Curvature K = Curvature()) {
  return u - K.k<T>() * lorentz_inner(x, u) * x;
}

template <typename T>
Vec<T> exp_map(const Vec<T>& x, const Vec<T>& z, Curvature K = Curvature()) {
  const T zz = lorentz_inner(z, z);
  const T scale = std::max(T(1), z.cwiseAbs().maxCoeff());
  if (zz < -static_cast<T>(kInvariantTol) * scale * scale) {
    throw GeometryError("exp_map: tangent vector is not space-like");
  }
  const T znorm = zz > T(0) ? std::sqrt(zz) : T(0);
  if (znorm < static_cast<T>(kTinyTangent)) return x;
  const T alpha = K.sqrt_neg<T>() * znorm;
  return std::cosh(alpha) * x + (std::sinh(alpha) / alpha) * z;
}

// beta - 1 where beta = K <x,y>_L, computed from the difference vector:
// beta - 1 = -K/2 * <x - y, x - y>_L, which avoids cancellation for nearby
// points.
template <typename T>
T beta_minus_one(const Vec<T>& x, const Vec<T>& y, Curvature K) {
  const Vec<T> d = x - y;
  return T(-0.5) * K.k<T>() * lorentz_inner(d, d);
}

template <typename T>
Vec<T> log_map(const Vec<T>& x, const Vec<T>& y, Curvature K = Curvature()) {
  if (x.size() != y.size()) throw GeometryError("log_map: dimension mismatch");
  if (x == y) return Vec<T>::Zero(x.size());
  const T bm1_raw = beta_minus_one(x, y, K);
  const T bm1 = std::max(bm1_raw, static_cast<T>(kConstructionTol));
  const T beta = T(1) + bm1;
  const T root = std::sqrt(bm1 * (beta + T(1)));
  const T acosh_beta = std::log1p(bm1 + root);
  return (acosh_beta / root) * ((y - x) - bm1_raw * x);
}

template <typename T>
T squared_distance(const Vec<T>& x, const Vec<T>& y, Curvature K = Curvature()) {
  return std::max(T(0), T(2) * K.inv<T>() - T(2) * lorentz_inner(x, y));
}

template <typename T>
T geodesic_distance(const Vec<T>& x, const Vec<T>& y, Curvature K = Curvature()) {
  const T bm1 = std::max(beta_minus_one(x, y, K), T(0));
  return std::log1p(bm1 + std::sqrt(bm1 * (bm1 + T(2)))) / K.sqrt_neg<T>();
}

template <typename T>
Mat<T> boost_matrix(const Vec<T>& v) {
  const T vv = v.squaredNorm();
  if (!(vv < T(1))) throw GeometryError("boost_matrix: velocity norm must be below 1");
  const Eigen::Index n = v.size();
  const T gamma = T(1) / std::sqrt(T(1) - vv);
  Mat<T> B(n + 1, n + 1);
  B(0, 0) = gamma;
  B.block(0, 1, 1, n) = -gamma * v.transpose();
  B.block(1, 0, n, 1) = -gamma * v;
  B.block(1, 1, n, n) = Mat<T>::Identity(n, n) + (gamma * gamma / (T(1) + gamma)) * v * v.transpose();
  return B;
}

template <typename T>
Mat<T> rotation_matrix(const Mat<T>& r) {
  if (r.rows() != r.cols()) throw GeometryError("rotation_matrix: spatial block must be square");
  const Eigen::Index n = r.rows();
  const T orth = (r.transpose() * r - Mat<T>::Identity(n, n)).cwiseAbs().maxCoeff();
  if (orth > static_cast<T>(kInvariantTol) || std::abs(r.determinant() - T(1)) > static_cast<T>(kInvariantTol)) {
    throw GeometryError("rotation_matrix: spatial block must be special orthogonal");
  }
  Mat<T> R = Mat<T>::Zero(n + 1, n + 1);
  R(0, 0) = T(1);
  R.block(1, 1, n, n) = r;
  return R;
}

// Reparametrized linear map.

// f_x(M) for M = [v^T; W]: the first row is rescaled by
// sqrt(|Wx|^2 - 1/K) / (v^T x). Throws when |v^T x| < 1e-12.
template <typename T>
Mat<T> fx_matrix(const Mat<T>& M, const Vec<T>& x, Curvature K = Curvature()) {
  if (M.cols() != x.size() || M.rows() < 2) throw GeometryError("fx_matrix: shape mismatch");
  const Eigen::Index m = M.rows() - 1;
  const Vec<T> wx = M.bottomRows(m) * x;
  const T vx = M.row(0).dot(x);
  if (std::abs(vx) < static_cast<T>(kConstructionTol)) throw GeometryError("fx_matrix: v^T x vanishes");
  Mat<T> out = M;
  out.row(0) *= std::sqrt(wx.squaredNorm() - K.inv<T>()) / vx;
  return out;
}

// f_x(M) x = [sqrt(|Wx|^2 - 1/K); Wx]. `strict` enforces the same v^T x
// condition as fx_matrix even though the composed result does not use v.
template <typename T>
Vec<T> fx_transform(const Mat<T>& M, const Vec<T>& x, Curvature K = Curvature(), bool strict = false) {
  if (M.cols() != x.size() || M.rows() < 2) throw GeometryError("fx_transform: shape mismatch");
  if (strict && std::abs(M.row(0).dot(x)) < static_cast<T>(kConstructionTol)) {
    throw GeometryError("fx_transform: v^T x vanishes");
  }
  const Eigen::Index m = M.rows() - 1;
  return project_to_hyperboloid<T>(M.bottomRows(m) * x, K);
}

// Tangent-space linear layer.

// Closed form of exp_0(diag(*, W) log_0(x)) as a block-diagonal matrix H
// with H x equal to the composite. Returns the identity-sized zero matrix
// when x is the origin or W x_s = 0 (the map then sends x to the origin).
template <typename T>
Mat<T> pseudo_rotation_matrix(const Mat<T>& W, const Vec<T>& x, Curvature K = Curvature()) {
  const Eigen::Index n = x.size() - 1;
  if (W.rows() != n || W.cols() != n) throw GeometryError("pseudo_rotation: W must be n x n");
  const T sk = K.sqrt_neg<T>();
  const Vec<T> xs = x.tail(n);
  const Vec<T> wxs = W * xs;
  const T wn = wxs.norm();
  Mat<T> H = Mat<T>::Zero(n + 1, n + 1);
  if (xs.squaredNorm() == T(0) || wn == T(0)) return H;
  const T xt = x(0);
  const T beta = sk * std::acosh(sk * xt) / std::sqrt(-K.k<T>() * xt * xt - T(1)) * wn;
  H(0, 0) = std::cosh(beta) / (sk * xt);
  H.block(1, 1, n, n) = (std::sinh(beta) / (sk * wn)) * W;
  return H;
}

template <typename T>
Vec<T> pseudo_rotation(const Mat<T>& W, const Vec<T>& x, Curvature K = Curvature()) {
  const Mat<T> H = pseudo_rotation_matrix(W, x, K);
  if (H(0, 0) == T(0)) return origin<T>(x.size() - 1, K);
  return H * x;
}

// The same map evaluated as exp_0 . diag(0, W) . log_0.
template <typename T>
Vec<T> pseudo_rotation_composite(const Mat<T>& W, const Vec<T>& x, Curvature K = Curvature()) {
  const Eigen::Index n = x.size() - 1;
  const Vec<T> o = origin<T>(n, K);
  const Vec<T> z = log_map(o, x, K);
  Vec<T> wz = Vec<T>::Zero(n + 1);
  wz.tail(n) = W * z.tail(n);
  return exp_map(o, wz, K);
}

// ---- aggregation ----------------------------------------------------------

template <typename T>
Vec<T> centroid(const Vec<T>& weights, const Mat<T>& points, Curvature K = Curvature()) {
  if (points.cols() == 0 || weights.size() != points.cols()) throw GeometryError("centroid: need matching weights");
  if ((weights.array() < T(0)).any() || !(weights.sum() > T(0))) {
    throw GeometryError("centroid: weights must be non-negative with a positive sum");
  }
  const Vec<T> s = points * weights;
  const T ss = lorentz_inner(s, s);
  if (!(ss < T(0))) throw GeometryError("centroid: weighted sum is not time-like");
  return s / (K.sqrt_neg<T>() * std::sqrt(-ss));
}

// ---- sampling -------------------------------------------------------------

template <typename T, typename Rng>
Vec<T> gaussian_vector(Eigen::Index n, T stddev, Rng& rng) {
  std::normal_distribution<T> dist(T(0), stddev);
  Vec<T> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

template <typename T, typename Rng>
Vec<T> random_point(Eigen::Index n, Curvature K, T scale, Rng& rng) {
  if (!(scale > T(0))) throw GeometryError("random_point: scale must be positive");
  return project_to_hyperboloid<T>(gaussian_vector<T>(n, scale, rng), K);
}

template <typename T, typename Rng>
Vec<T> random_tangent(const Vec<T>& x, Curvature K, T scale, Rng& rng) {
  return project_to_tangent<T>(x, gaussian_vector<T>(x.size(), scale, rng), K);
}

// Random element of SO(n) from the QR factorization of a Gaussian matrix.
template <typename T, typename Rng>
Mat<T> random_rotation(Eigen::Index n, Rng& rng) {
  std::normal_distribution<T> dist(T(0), T(1));
  Mat<T> g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = dist(rng);
  Eigen::HouseholderQR<Mat<T>> qr(g);
  Mat<T> q = qr.householderQ() * Mat<T>::Identity(n, n);
  const Mat<T> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (r(i, i) < T(0)) q.col(i) = -q.col(i);
  }
  if (q.determinant() < T(0)) q.col(0) = -q.col(0);
  return q;
}

// Velocity with uniformly random direction and norm uniform in [0, max_speed).
template <typename T, typename Rng>
Vec<T> random_velocity(Eigen::Index n, T max_speed, Rng& rng) {
  Vec<T> dir = gaussian_vector<T>(n, T(1), rng);
  dir.normalize();
  std::uniform_real_distribution<T> speed(T(0), max_speed);
  return speed(rng) * dir;
}

}  // namespace hybo::lorentz
