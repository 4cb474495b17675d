#pragma once

// Dense linear algebra and sampling kernels shared by every other module.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "corel/errors.hpp"

namespace corel {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ArgumentError(what);
}

inline void require_finite(const Mat& m, const char* name) {
  if (!m.allFinite()) throw ArgumentError(std::string(name) + ": non-finite entries");
}

inline void require_square(const Mat& m, const char* name) {
  if (m.rows() != m.cols()) {
    throw ArgumentError(std::string(name) + ": matrix is " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()) + ", expected square");
  }
}

inline Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

}  // namespace detail

// ---------------------------------------------------------------------------
// svec / smat

/// Length of svec for a d x d symmetric matrix.
inline Eigen::Index svec_size(Eigen::Index d) { return d * (d + 1) / 2; }

/// Isometric packing of the upper triangle, row by row, with off-diagonal
/// entries scaled by sqrt(2) so that <svec(X), svec(Y)> = <X, Y>_F.
inline Vec svec(const Mat& s) {
  detail::require_square(s, "svec");
  const Eigen::Index d = s.rows();
  Vec out(svec_size(d));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    out(k++) = s(i, i);
    for (Eigen::Index j = i + 1; j < d; ++j) out(k++) = M_SQRT2 * 0.5 * (s(i, j) + s(j, i));
  }
  return out;
}

/// Writes svec(h h^T) into `out` without forming the outer product.
template <typename Derived, typename OutDerived>
void svec_outer(const Eigen::MatrixBase<Derived>& h, Eigen::MatrixBase<OutDerived>& out) {
  const Eigen::Index d = h.size();
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double hi = h(i);
    out(k++) = hi * hi;
    const double scaled = M_SQRT2 * hi;
    for (Eigen::Index j = i + 1; j < d; ++j) out(k++) = scaled * h(j);
  }
}

/// Inverse of svec.
inline Mat smat(const Vec& v) {
  const auto n = v.size();
  const auto d = static_cast<Eigen::Index>(std::llround((std::sqrt(8.0 * n + 1.0) - 1.0) / 2.0));
  if (svec_size(d) != n) {
    throw ArgumentError("smat: length " + std::to_string(n) + " is not a triangular number");
  }
  Mat s(d, d);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    s(i, i) = v(k++);
    for (Eigen::Index j = i + 1; j < d; ++j) {
      s(i, j) = s(j, i) = v(k++) / M_SQRT2;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition

struct SymEig {
  Vec values;   // descending
  Mat vectors;  // columns, matching `values`
};

inline SymEig sym_eig(const Mat& s) {
  detail::require_square(s, "sym_eig");
  detail::require_finite(s, "sym_eig");
  SymEig out;
  if (s.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Mat> solver(detail::symmetrized(s));
  if (solver.info() != Eigen::Success) throw Error("sym_eig: eigensolver failed");
  const Eigen::Index n = s.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const Vec& ev = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return ev(a) > ev(b); });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = ev(order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = solver.eigenvectors().col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

/// Smallest eigenvalue of a symmetric matrix.
inline double lambda_min(const Mat& s) {
  if (s.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> solver(detail::symmetrized(s), Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

/// Symmetric PSD square root; negative eigenvalues are clamped to zero.
inline Mat psd_sqrt(const Mat& s) {
  const SymEig e = sym_eig(s);
  const Vec root = e.values.cwiseMax(0.0).cwiseSqrt();
  return e.vectors * root.asDiagonal() * e.vectors.transpose();
}

/// Projection onto the PSD cone by truncating negative eigenvalues.
inline Mat psd_truncate(const Mat& s) {
  const SymEig e = sym_eig(s);
  const Mat out = e.vectors * e.values.cwiseMax(0.0).asDiagonal() * e.vectors.transpose();
  return detail::symmetrized(out);
}

// ---------------------------------------------------------------------------
// Pseudo-inverse and least squares

inline Mat pinv(const Mat& m, double tol = 1e-10) {
  detail::require(tol > 0.0 && tol < 1.0, "pinv: tol must lie in (0, 1)");
  detail::require_finite(m, "pinv");
  if (m.size() == 0) return Mat::Zero(m.cols(), m.rows());
  Eigen::BDCSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  const double cutoff = tol * sv(0);
  Vec inv = Vec::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

struct LeastSquaresResult {
  Mat W;                    // p x q
  bool rank_deficient = false;
  double sigma_min = 0.0;   // smallest singular value of X
};

/// Minimum-norm minimizer of ||X W - Y||_F.
inline LeastSquaresResult least_squares(const Mat& X, const Mat& Y, double tol = 1e-10) {
  if (X.rows() != Y.rows()) {
    throw ArgumentError("least_squares: X has " + std::to_string(X.rows()) + " rows, Y has " +
                        std::to_string(Y.rows()));
  }
  detail::require(X.rows() >= 1, "least_squares: need at least one row");
  detail::require_finite(X, "least_squares X");
  detail::require_finite(Y, "least_squares Y");
  Eigen::BDCSVD<Mat> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  LeastSquaresResult out;
  const double cutoff = tol * (sv.size() ? sv(0) : 0.0);
  Vec inv = Vec::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
  }
  out.W = svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * Y);
  // A wide X (fewer rows than columns) is rank deficient by construction.
  out.sigma_min = X.rows() >= X.cols() && sv.size() ? sv(sv.size() - 1) : 0.0;
  out.rank_deficient = X.rows() < X.cols() || out.sigma_min <= cutoff;
  return out;
}

// ---------------------------------------------------------------------------
// Spectra and Lyapunov equations

inline double spectral_radius(const Mat& m) {
  detail::require_square(m, "spectral_radius");
  detail::require_finite(m, "spectral_radius");
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Mat> solver(m, false);
  if (solver.info() != Eigen::Success) throw Error("spectral_radius: eigensolver failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

inline double spectral_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

inline double sigma_min(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<Mat> svd(m);
  const Vec& sv = svd.singularValues();
  // Only min(rows, cols) singular values exist; for wide/tall this is the
  // meaningful lower bound in rank arguments.
  return sv(sv.size() - 1);
}

/// Stationary covariance: Sigma = A Sigma A^T + W.
inline Mat solve_lyapunov(const Mat& A, const Mat& W) {
  detail::require_square(A, "solve_lyapunov A");
  detail::require_square(W, "solve_lyapunov W");
  detail::require(A.rows() == W.rows(), "solve_lyapunov: A and W dimensions differ");
  const Eigen::Index n = A.rows();
  if (n == 0) return Mat(0, 0);
  const double rho = spectral_radius(A);
  if (!(rho < 1.0 - 1e-6)) {
    throw InstabilityError("solve_lyapunov: spectral radius " + std::to_string(rho) + " >= 1",
                           rho);
  }
  const Mat Ws = detail::symmetrized(W);
  Mat sigma;
  if (n <= 40) {
    // (I - A (x) A) vec(Sigma) = vec(W), column-major vec.
    const Eigen::Index nn = n * n;
    Mat lhs = Mat::Identity(nn, nn);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        lhs.block(i * n, j * n, n, n) -= A(i, j) * A;
      }
    }
    const Vec rhs = Eigen::Map<const Vec>(Ws.data(), nn);
    const Vec x = lhs.partialPivLu().solve(rhs);
    sigma = Eigen::Map<const Mat>(x.data(), n, n);
  } else {
    // Doubling: S_{k+1} = S_k + A_k S_k A_k^T, A_{k+1} = A_k^2.
    sigma = Ws;
    Mat Ak = A;
    for (int it = 0; it < 200; ++it) {
      const Mat inc = Ak * sigma * Ak.transpose();
      sigma += inc;
      Ak = (Ak * Ak).eval();
      if (inc.norm() <= 1e-17 * (1.0 + sigma.norm()) || Ak.norm() == 0.0) break;
    }
  }
  sigma = detail::symmetrized(sigma);
  // Residual correction for the doubling path.
  for (int refine = 0; refine < 3; ++refine) {
    const Mat resid = Ws + A * sigma * A.transpose() - sigma;
    if (resid.norm() <= 1e-13 * (1.0 + sigma.norm())) break;
    if (n <= 40) break;
    Mat corr = resid;
    Mat Ak = A;
    for (int it = 0; it < 200; ++it) {
      const Mat inc = Ak * corr * Ak.transpose();
      corr += inc;
      Ak = (Ak * Ak).eval();
      if (inc.norm() <= 1e-17 * (1.0 + corr.norm()) || Ak.norm() == 0.0) break;
    }
    sigma = detail::symmetrized(sigma + corr);
  }
  return sigma;
}

// ---------------------------------------------------------------------------
// Random numbers

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Seedable, splittable generator (mt19937_64 seeded through splitmix64).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(detail::splitmix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent child stream; deterministic in (seed, stream).
  Rng split(std::uint64_t stream) const {
    return Rng(detail::splitmix64(seed_ ^ detail::splitmix64(stream + 0x632BE59BD9B4E019ULL)));
  }

  double normal() { return normal_(engine_); }

  Vec normal_vec(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Cached factor for repeated draws from N(mean, cov).
class GaussianSampler {
 public:
  GaussianSampler() = default;
  GaussianSampler(Vec mean, const Mat& cov) : mean_(std::move(mean)) {
    detail::require_square(cov, "gaussian_sample cov");
    detail::require(cov.rows() == mean_.size(), "gaussian_sample: mean/cov size mismatch");
    detail::require_finite(cov, "gaussian_sample cov");
    if (cov.rows() == 0) return;
    const SymEig e = sym_eig(cov);
    if (e.values.minCoeff() < -1e-10) {
      throw ArgumentError("gaussian_sample: covariance is indefinite (eigenvalue " +
                          std::to_string(e.values.minCoeff()) + ")");
    }
    factor_ = e.vectors * e.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    zero_ = e.values.maxCoeff() <= 0.0;
  }

  Eigen::Index dim() const { return mean_.size(); }

  Vec operator()(Rng& rng) const {
    const Vec z = rng.normal_vec(mean_.size());
    if (zero_ || mean_.size() == 0) return mean_;
    return mean_ + factor_ * z;
  }

 private:
  Vec mean_;
  Mat factor_;
  bool zero_ = true;
};

/// One draw from N(mean, cov).
inline Vec gaussian_sample(Rng& rng, const Vec& mean, const Mat& cov) {
  return GaussianSampler(mean, cov)(rng);
}

}  // namespace corel
