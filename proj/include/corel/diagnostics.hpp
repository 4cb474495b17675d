#pragma once

// Empirical checks of the analytical devices behind the sample-complexity
// argument: persistency of excitation of the lifted covariates, the Gaussian
// quadratic-form lower bound, and Procrustes-aligned latent errors.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "corel/control_eval.hpp"

namespace corel {

// ---------------------------------------------------------------------------
// Persistency of excitation

struct PeCurve {
  std::vector<Eigen::Index> Ts;
  std::vector<double> min_eigs;  // lambda_min(sum_t f_t f_t^T), not normalized
  double slope = std::numeric_limits<double>::quiet_NaN();
};

/// Least-squares slope of log(y) against log(x) over entries with y > 0.
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] > 0.0 && ys[i] > 0.0) {
      lx.push_back(std::log(xs[i]));
      ly.push_back(std::log(ys[i]));
    }
  }
  if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = double(lx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i], my += ly[i];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

/// Minimum eigenvalue of the lifted Gram matrix on nested prefixes of one
/// excited trajectory.
inline PeCurve pe_curve(const LqgModel& m, Eigen::Index H, double sigma_u,
                        const std::vector<Eigen::Index>& Ts, Rng& rng) {
  detail::require(!Ts.empty(), "pe_curve: empty T list");
  detail::require(H >= 1, "pe_curve: H must be >= 1");
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    detail::require(Ts[i] >= 1, "pe_curve: T must be positive");
    if (i) detail::require(Ts[i] > Ts[i - 1], "pe_curve: Ts must be strictly increasing");
  }
  const Trajectory traj = rollout_excite(m, Ts.back(), H, sigma_u, rng);
  const Eigen::Index dh = H * (m.dy() + m.du());
  LiftedMoments mom(dh);
  const Eigen::Index p = mom.gram.rows();

  PeCurve curve;
  curve.Ts = Ts;
  Eigen::Index done = 0;
  for (Eigen::Index T : Ts) {
    Mat rows(T - done, dh);
    for (Eigen::Index i = done; i < T; ++i) rows.row(i - done) = history_at(traj, H + i, H);
    mom.add(rows, nullptr);
    done = T;
    curve.min_eigs.push_back(T < p ? 0.0 : std::max(0.0, lambda_min(mom.full_gram())));
  }
  std::vector<double> xs(Ts.begin(), Ts.end());
  curve.slope = loglog_slope(xs, curve.min_eigs);
  return curve;
}

// ---------------------------------------------------------------------------
// Gaussian quadratic-form lower bound

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// E|v_{d+1} + sum_i v_i z_i^2| for z ~ N(0, I_d), by Monte Carlo.
inline McEstimate abs_quadform_mc(const Vec& v, Eigen::Index samples, Rng& rng) {
  const Eigen::Index d = v.size() - 1;
  double sum = 0.0, sumsq = 0.0;
  for (Eigen::Index s = 0; s < samples; ++s) {
    double acc = v(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double z = rng.normal();
      acc += v(i) * z * z;
    }
    const double a = std::abs(acc);
    sum += a;
    sumsq += a * a;
  }
  const double n = double(samples);
  McEstimate est;
  est.mean = sum / n;
  const double var = std::max(0.0, (sumsq - n * est.mean * est.mean) / (n - 1.0));
  est.std_error = std::sqrt(var / n);
  return est;
}

struct QuadformProbe {
  std::string name;
  McEstimate estimate;
};

struct QuadformReport {
  Eigen::Index d = 0;
  Eigen::Index trials = 0;
  Eigen::Index samples = 0;
  double bound = 0.0;         // 0.8 d^{-3/2}
  McEstimate worst_random;    // smallest mean over random unit vectors
  McEstimate worst_overall;   // including the structured probes
  std::vector<QuadformProbe> probes;

  /// min mean >= bound - 3 SE, over random and structured vectors.
  bool holds() const { return worst_overall.mean >= bound - 3.0 * worst_overall.std_error; }
};

inline double quadform_bound(Eigen::Index d) { return 0.8 * std::pow(double(d), -1.5); }

inline QuadformReport quadform_lb_mc(Eigen::Index d, Eigen::Index trials, Eigen::Index samples,
                                     Rng& rng) {
  detail::require(d >= 1, "quadform_lb_mc: d must be >= 1");
  detail::require(trials >= 1, "quadform_lb_mc: trials must be >= 1");
  detail::require(samples >= 10000, "quadform_lb_mc: need at least 1e4 samples");
  QuadformReport rep;
  rep.d = d;
  rep.trials = trials;
  rep.samples = samples;
  rep.bound = quadform_bound(d);
  rep.worst_random.mean = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < trials; ++k) {
    Vec v = rng.normal_vec(d + 1);
    v.normalize();
    const McEstimate est = abs_quadform_mc(v, samples, rng);
    if (est.mean < rep.worst_random.mean) rep.worst_random = est;
  }
  rep.worst_overall = rep.worst_random;

  // Boundary of the case split: |v_{d+1}| = 2 sqrt(d / (4d + 1)) with the
  // remaining mass spread evenly over the squared terms.
  auto probe = [&](std::string name, Vec v) {
    const McEstimate est = abs_quadform_mc(v, samples, rng);
    if (est.mean < rep.worst_overall.mean) rep.worst_overall = est;
    rep.probes.push_back({std::move(name), est});
  };
  Vec e = Vec::Zero(d + 1);
  e(d) = 1.0;
  probe("constant", e);
  const double head = 2.0 * std::sqrt(double(d) / (4.0 * d + 1.0));
  const double rest = std::sqrt((1.0 - head * head) / double(d));
  Vec v(d + 1);
  v.head(d).setConstant(-rest);
  v(d) = head;
  probe("boundary_cancelling", v);
  v.head(d).setConstant(rest);
  probe("boundary_aligned", v);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = (i % 2 == 0) ? rest : -rest;
  probe("boundary_alternating", v);
  return rep;
}

struct QuadformGeneral {
  McEstimate estimate;  // E|x^T A x + b| after scaling to |A|_F^2 + b^2 = 1
  double bound = 0.0;   // 0.8 min(lambda_min(Sigma), 1) d^{-3/2}
};

/// Correlated-Gaussian version: x ~ N(0, Sigma), (A, b) rescaled to unit norm.
inline QuadformGeneral quadform_general_mc(const Mat& Sigma, const Mat& A, double b,
                                           Eigen::Index samples, Rng& rng) {
  detail::require_square(Sigma, "quadform_general_mc Sigma");
  detail::require(A.rows() == Sigma.rows() && A.cols() == Sigma.cols(),
                  "quadform_general_mc: A shape");
  const double scale = std::sqrt(A.squaredNorm() + b * b);
  detail::require(scale > 0.0, "quadform_general_mc: (A, b) must be nonzero");
  const Mat As = detail::symmetrized(A) / scale;
  const double bs = b / scale;
  const GaussianSampler sampler(Vec::Zero(Sigma.rows()), Sigma);
  double sum = 0.0, sumsq = 0.0;
  for (Eigen::Index s = 0; s < samples; ++s) {
    const Vec x = sampler(rng);
    const double a = std::abs(x.dot(As * x) + bs);
    sum += a;
    sumsq += a * a;
  }
  const double n = double(samples);
  QuadformGeneral out;
  out.estimate.mean = sum / n;
  out.estimate.std_error =
      std::sqrt(std::max(0.0, (sumsq - n * out.estimate.mean * out.estimate.mean) / (n - 1.0)) / n);
  out.bound = 0.8 * std::min(lambda_min(Sigma), 1.0) * std::pow(double(Sigma.rows()), -1.5);
  return out;
}

// ---------------------------------------------------------------------------
// Orthogonal alignment and latent errors

struct Procrustes {
  Mat S;  // orthogonal d_x x d_x
  double dist = 0.0;  // |M_hat - S M_star|_F
};

inline Procrustes procrustes_align(const Mat& M_hat, const Mat& M_star) {
  if (M_hat.rows() != M_star.rows() || M_hat.cols() != M_star.cols()) {
    throw ArgumentError("procrustes_align: shapes " + std::to_string(M_hat.rows()) + "x" +
                        std::to_string(M_hat.cols()) + " and " + std::to_string(M_star.rows()) +
                        "x" + std::to_string(M_star.cols()) + " differ");
  }
  Eigen::JacobiSVD<Mat> svd(M_hat * M_star.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Procrustes out;
  out.S = svd.matrixU() * svd.matrixV().transpose();
  out.dist = (M_hat - out.S * M_star).norm();
  return out;
}

struct LatentErrors {
  double M_err = 0.0;  // Frobenius
  double A_err = 0.0;  // spectral norms below
  double B_err = 0.0;
  double Q_err = 0.0;
  double K_err = 0.0;
  Mat S;
};

struct LearnedArtifacts {
  Mat M_hat, A_hat, B_hat, Q_hat, K_hat;
};

/// Errors of learned artifacts against the ground truth expressed in the
/// same (normalized) coordinates, after Procrustes alignment of M_hat to M_star.
inline LatentErrors latent_errors(const LearnedArtifacts& learned, const LqgModel& truth,
                                  const Mat& K_star, const Mat& M_star) {
  const Procrustes pr = procrustes_align(learned.M_hat, M_star);
  const Mat& S = pr.S;
  LatentErrors e;
  e.S = S;
  e.M_err = pr.dist;
  e.A_err = spectral_norm(learned.A_hat - S * truth.A * S.transpose());
  e.B_err = spectral_norm(learned.B_hat - S * truth.B);
  e.Q_err = spectral_norm(learned.Q_hat - S * truth.Q * S.transpose());
  e.K_err = spectral_norm(learned.K_hat - K_star * S.transpose());
  return e;
}

}  // namespace corel
