#pragma once

// Ground-truth LQG problem: Riccati solvers, the separation-principle
// controller, the cost observability Gram matrix and the normalized
// parameterization.

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "corel/matstat.hpp"

namespace corel {

/// x_{t+1} = A x_t + B u_t + w_t,  y_t = C x_t + v_t,
/// c_t = x_t^T Q x_t + u_t^T R u_t.
struct LqgModel {
  Mat A, B, C, Q, R, Sigma_w, Sigma_v, Sigma_0;

  Eigen::Index dx() const { return A.rows(); }
  Eigen::Index du() const { return B.cols(); }
  Eigen::Index dy() const { return C.rows(); }

  /// Throws ArgumentError on inconsistent shapes or non-finite entries.
  void validate() const {
    const auto n = dx();
    auto shape = [](const Mat& m, Eigen::Index r, Eigen::Index c, const char* name) {
      if (m.rows() != r || m.cols() != c) {
        throw ArgumentError(std::string("LqgModel: ") + name + " is " + std::to_string(m.rows()) +
                            "x" + std::to_string(m.cols()) + ", expected " + std::to_string(r) +
                            "x" + std::to_string(c));
      }
      detail::require_finite(m, name);
    };
    detail::require(n > 0, "LqgModel: empty state");
    shape(A, n, n, "A");
    shape(B, n, du(), "B");
    shape(C, dy(), n, "C");
    shape(Q, n, n, "Q");
    shape(R, du(), du(), "R");
    shape(Sigma_w, n, n, "Sigma_w");
    shape(Sigma_v, dy(), dy(), "Sigma_v");
    shape(Sigma_0, n, n, "Sigma_0");
  }
};

struct DareOptions {
  double tol = 1e-13;
  int max_iter = 50000;
};

/// Control-form DARE  P = A^T (P - P B (B^T P B + R)^{-1} B^T P) A + Q
/// by fixed-point iteration from P_0 = Q.
inline Mat solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                      const DareOptions& opts = {}) {
  detail::require_square(A, "solve_dare A");
  detail::require(B.rows() == A.rows(), "solve_dare: B rows must match A");
  detail::require(Q.rows() == A.rows() && Q.cols() == A.cols(), "solve_dare: Q shape");
  detail::require(R.rows() == B.cols() && R.cols() == B.cols(), "solve_dare: R shape");
  Mat P = detail::symmetrized(Q);
  double gap = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iter; ++it) {
    Mat next;
    if (B.cols() == 0) {
      next = A.transpose() * P * A + Q;
    } else {
      const Mat gram = B.transpose() * P * B + R;
      const Mat PB = P * B;
      const Mat inner = P - PB * gram.ldlt().solve(PB.transpose());
      next = A.transpose() * inner * A + Q;
    }
    next = detail::symmetrized(next);
    if (!next.allFinite()) break;
    gap = (next - P).norm();
    P = std::move(next);
    if (gap <= opts.tol * (1.0 + P.norm())) return P;
  }
  throw NonConvergenceError("solve_dare: no convergence (last step " + std::to_string(gap) + ")",
                            gap);
}

/// Residual of the control-form DARE, Frobenius norm.
inline double dare_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P) {
  const Mat gram = B.transpose() * P * B + R;
  const Mat PB = P * B;
  const Mat rhs = A.transpose() * (P - PB * gram.ldlt().solve(PB.transpose())) * A + Q;
  return (P - rhs).norm();
}

/// Filter-form DARE, solved through duality.
inline Mat filter_riccati(const LqgModel& m, const DareOptions& opts = {}) {
  return solve_dare(m.A.transpose(), m.C.transpose(), m.Sigma_w, m.Sigma_v, opts);
}

inline Mat kalman_gain(const LqgModel& m, const Mat& S) {
  const Mat innovation = m.C * S * m.C.transpose() + m.Sigma_v;
  Eigen::LDLT<Mat> ldlt(innovation);
  if (ldlt.info() != Eigen::Success || ldlt.isNegative() ||
      ldlt.vectorD().cwiseAbs().minCoeff() <= 1e-300) {
    throw ArgumentError("kalman_gain: innovation covariance is singular");
  }
  return ldlt.solve(m.C * S).transpose();
}

inline Mat lqr_gain(const Mat& A, const Mat& B, const Mat& /*Q*/, const Mat& R, const Mat& P) {
  if (B.cols() == 0) return Mat::Zero(0, A.cols());
  const Mat gram = B.transpose() * P * B + R;
  return -gram.ldlt().solve(B.transpose() * P * A);
}

/// Sum_{t < horizon} (A^t)^T Q A^t.
inline Mat cost_gram(const Mat& A, const Mat& Q, Eigen::Index horizon) {
  Mat out = Mat::Zero(A.rows(), A.cols());
  Mat power = Mat::Identity(A.rows(), A.cols());
  for (Eigen::Index t = 0; t < horizon; ++t) {
    out += power.transpose() * Q * power;
    power = (A * power).eval();
  }
  return detail::symmetrized(out);
}

/// Gains and derived quantities of the separation-principle controller.
struct DerivedGains {
  Mat S_star;  // filter Riccati (prior covariance)
  Mat P_star;  // control Riccati
  Mat L_star;  // Kalman gain
  Mat K_star;  // feedback gain, u = K z
  Mat A_bar;   // (I - L C) A
  Mat B_bar;   // (I - L C) B
  Mat Q_bar;   // cost observability Gram matrix over d_x steps
};

inline DerivedGains derive_gains(const LqgModel& m) {
  DerivedGains g;
  g.S_star = filter_riccati(m);
  g.P_star = solve_dare(m.A, m.B, m.Q, m.R);
  g.L_star = kalman_gain(m, g.S_star);
  g.K_star = lqr_gain(m.A, m.B, m.Q, m.R, g.P_star);
  const Mat I_LC = Mat::Identity(m.dx(), m.dx()) - g.L_star * m.C;
  g.A_bar = I_LC * m.A;
  g.B_bar = I_LC * m.B;
  g.Q_bar = cost_gram(m.A, m.Q, m.dx());
  return g;
}

/// Posterior error covariance E[(x_t - z*_t)(x_t - z*_t)^T].
inline Mat posterior_covariance(const LqgModel& m, const Mat& S) {
  const Mat innovation = m.C * S * m.C.transpose() + m.Sigma_v;
  return detail::symmetrized(S - S * m.C.transpose() * innovation.ldlt().solve(m.C * S));
}

struct NormalizedModel {
  LqgModel model;
  Mat transform;      // Q_bar^{1/2}
  Mat transform_inv;  // Q_bar^{-1/2}
};

/// Change of state coordinates x' = Q_bar^{1/2} x after which the
/// `horizon`-step cost Gram matrix is the identity.
inline NormalizedModel normalize_model(const LqgModel& m, std::optional<Eigen::Index> horizon = {}) {
  const Mat qbar = cost_gram(m.A, m.Q, horizon.value_or(m.dx()));
  const SymEig e = sym_eig(qbar);
  if (e.values.minCoeff() < 1e-10) {
    throw ObservabilityError("normalize_model: cost Gram matrix is singular (lambda_min = " +
                             std::to_string(e.values.minCoeff()) + ")");
  }
  NormalizedModel out;
  out.transform = e.vectors * e.values.cwiseSqrt().asDiagonal() * e.vectors.transpose();
  out.transform_inv =
      e.vectors * e.values.cwiseSqrt().cwiseInverse().asDiagonal() * e.vectors.transpose();
  const Mat& T = out.transform;
  const Mat& Ti = out.transform_inv;
  LqgModel& n = out.model;
  n.A = T * m.A * Ti;
  n.B = T * m.B;
  n.C = m.C * Ti;
  n.Q = detail::symmetrized(Ti * m.Q * Ti);
  n.R = m.R;
  n.Sigma_w = detail::symmetrized(T * m.Sigma_w * T);
  n.Sigma_v = m.Sigma_v;
  n.Sigma_0 = detail::symmetrized(T * m.Sigma_0 * T);
  return out;
}

// ---------------------------------------------------------------------------
// Assumption checks

/// [B, AB, ..., A^{n-1} B]
inline Mat controllability_matrix(const Mat& A, const Mat& B) {
  const auto n = A.rows();
  Mat out(n, n * B.cols());
  Mat block = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    out.middleCols(k * B.cols(), B.cols()) = block;
    block = (A * block).eval();
  }
  return out;
}

/// [C; CA; ...; C A^{n-1}]
inline Mat observability_matrix(const Mat& A, const Mat& C) {
  return controllability_matrix(A.transpose(), C.transpose()).transpose();
}

/// max_{k <= max_power} ||A^k||_2 rho(A)^{-k}.  For a nilpotent A the
/// normalization is dropped and the largest ||A^k||_2 is returned.
inline double transient_constant(const Mat& A, int max_power = 200) {
  const double rho = spectral_radius(A);
  double best = 1.0;
  Mat power = Mat::Identity(A.rows(), A.cols());
  for (int k = 1; k <= max_power; ++k) {
    power = (A * power).eval();
    const double norm = spectral_norm(power);
    if (norm == 0.0) break;
    const double value = rho > 1e-12 ? norm * std::pow(rho, -k) : norm;
    if (!std::isfinite(value)) break;
    best = std::max(best, value);
  }
  return best;
}

struct AssumptionReport {
  struct Item {
    bool pass = false;
    double value = 0.0;
  };
  Item stable;   // value: rho(A)
  Item nu;       // sigma_min of [B, AB, ...]
  Item omega;    // sigma_min of [C; CA; ...]
  Item kappa;    // sigma_min of [W, AW, ...], W = Sigma_w^{1/2}
  Item mu;       // sqrt(lambda_min(Q_bar))
  Item sigma_v;  // sqrt(lambda_min(Sigma_v))
  Item r;        // sqrt(lambda_min(R))
  Item rho_bar;  // rho((I - L C) A)
  double alpha = 0.0;  // max(alpha(A), alpha(A_bar))
  std::string note;    // set when the filter gains could not be computed

  bool all_pass() const {
    return stable.pass && nu.pass && omega.pass && kappa.pass && mu.pass && sigma_v.pass &&
           r.pass && rho_bar.pass;
  }
};

inline AssumptionReport check_assumptions(const LqgModel& m, double margin = 1e-8) {
  m.validate();
  AssumptionReport rep;
  const auto n = m.dx();
  rep.stable.value = spectral_radius(m.A);
  rep.stable.pass = rep.stable.value < 1.0;
  rep.nu.value = sigma_min(controllability_matrix(m.A, m.B));
  rep.nu.pass = rep.nu.value > margin;
  rep.omega.value = sigma_min(observability_matrix(m.A, m.C));
  rep.omega.pass = rep.omega.value > margin;
  rep.kappa.value = sigma_min(controllability_matrix(m.A, psd_sqrt(m.Sigma_w)));
  rep.kappa.pass = rep.kappa.value > margin;
  rep.mu.value = std::sqrt(std::max(0.0, lambda_min(cost_gram(m.A, m.Q, n))));
  rep.mu.pass = rep.mu.value > margin;
  rep.sigma_v.value = std::sqrt(std::max(0.0, lambda_min(m.Sigma_v)));
  rep.sigma_v.pass = rep.sigma_v.value > margin;
  rep.r.value = std::sqrt(std::max(0.0, lambda_min(m.R)));
  rep.r.pass = rep.r.value > margin;
  const double alpha_a = transient_constant(m.A);
  rep.alpha = alpha_a;
  try {
    const Mat S = filter_riccati(m);
    const Mat L = kalman_gain(m, S);
    const Mat abar = (Mat::Identity(n, n) - L * m.C) * m.A;
    rep.rho_bar.value = spectral_radius(abar);
    rep.rho_bar.pass = rep.rho_bar.value < 1.0;
    rep.alpha = std::max(alpha_a, transient_constant(abar));
  } catch (const Error& e) {
    rep.rho_bar.pass = false;
    rep.note = e.what();
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Optimal cost

/// Infinite-horizon average cost of the Kalman filter + LQR controller,
/// from the stationary covariance of the joint state [x; z].
inline double optimal_average_cost(const LqgModel& m, const DerivedGains& g) {
  const auto n = m.dx();
  const Mat BK = m.B * g.K_star;
  const Mat LC = g.L_star * m.C;
  Mat F(2 * n, 2 * n);
  F << m.A, BK, LC * m.A, g.A_bar + g.B_bar * g.K_star + LC * BK;
  Mat G = Mat::Zero(2 * n, n + m.dy());
  G.topLeftCorner(n, n).setIdentity();
  G.bottomLeftCorner(n, n) = LC;
  G.bottomRightCorner(n, m.dy()) = g.L_star;
  Mat noise = Mat::Zero(n + m.dy(), n + m.dy());
  noise.topLeftCorner(n, n) = m.Sigma_w;
  noise.bottomRightCorner(m.dy(), m.dy()) = m.Sigma_v;
  const Mat sigma = solve_lyapunov(F, G * noise * G.transpose());
  const Mat sxx = sigma.topLeftCorner(n, n);
  const Mat szz = sigma.bottomRightCorner(n, n);
  return (m.Q.cwiseProduct(sxx)).sum() +
         (m.R.cwiseProduct(g.K_star * szz * g.K_star.transpose())).sum();
}

inline double optimal_average_cost(const LqgModel& m) {
  return optimal_average_cost(m, derive_gains(m));
}

}  // namespace corel
