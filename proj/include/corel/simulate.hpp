#pragma once

// Rollouts of the ground-truth system, Kalman-filter oracle states, and the
// H-step history datasets used by every regression downstream.

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>

#include "corel/lqg_model.hpp"

namespace corel {

/// One rollout of length N = T + H: observations y_0..y_N, controls and
/// costs for t = 0..N-1.  Oracle states are kept only on request.
struct Trajectory {
  Mat ys;  // (N+1) x dy
  Mat us;  // N x du
  Vec cs;  // N
  std::optional<Mat> xs;  // (N+1) x dx
  std::optional<Mat> zs;  // (N+1) x dx

  Eigen::Index length() const { return us.rows(); }
};

/// Kalman states z_{t+1} = A_bar z_t + B_bar u_t + L y_{t+1}, z_0 = L y_0,
/// for an explicit gain L.
inline Mat kalman_states(const LqgModel& m, const Trajectory& traj, const Mat& L) {
  const auto n = m.dx();
  const Mat I_LC = Mat::Identity(n, n) - L * m.C;
  const Mat abar = I_LC * m.A;
  const Mat bbar = I_LC * m.B;
  const Eigen::Index steps = traj.ys.rows();
  Mat zs(steps, n);
  Vec z = L * traj.ys.row(0).transpose();
  zs.row(0) = z.transpose();
  for (Eigen::Index t = 0; t + 1 < steps; ++t) {
    z = abar * z + bbar * traj.us.row(t).transpose() + L * traj.ys.row(t + 1).transpose();
    zs.row(t + 1) = z.transpose();
  }
  return zs;
}

inline Mat kalman_states(const LqgModel& m, const Trajectory& traj) {
  const Mat S = filter_riccati(m);
  return kalman_states(m, traj, kalman_gain(m, S));
}

/// Excited rollout: x_0 ~ N(0, Sigma_0), u_t ~ N(0, sigma_u^2 I).
/// sigma_u = 0 is accepted here (degenerate test runs); the pipeline rejects it.
inline Trajectory rollout_excite(const LqgModel& m, Eigen::Index T, Eigen::Index H, double sigma_u,
                                 Rng& rng, bool keep_oracle = false) {
  m.validate();
  detail::require(T >= 1 && H >= 0, "rollout_excite: need T >= 1 and H >= 0");
  detail::require(sigma_u >= 0.0, "rollout_excite: sigma_u must be nonnegative");
  const double rho = spectral_radius(m.A);
  if (!(rho < 1.0)) {
    throw InstabilityError("rollout_excite: refusing to excite an unstable system (rho = " +
                               std::to_string(rho) + ")",
                           rho);
  }
  const Eigen::Index N = T + H;
  const auto dx = m.dx(), du = m.du(), dy = m.dy();
  const GaussianSampler init(Vec::Zero(dx), m.Sigma_0);
  const GaussianSampler process(Vec::Zero(dx), m.Sigma_w);
  const GaussianSampler sensor(Vec::Zero(dy), m.Sigma_v);

  Trajectory traj;
  traj.ys.resize(N + 1, dy);
  traj.us.resize(N, du);
  traj.cs.resize(N);
  Mat xs;
  if (keep_oracle) xs.resize(N + 1, dx);

  Vec x = init(rng);
  for (Eigen::Index t = 0;; ++t) {
    traj.ys.row(t) = (m.C * x + sensor(rng)).transpose();
    if (keep_oracle) xs.row(t) = x.transpose();
    if (t == N) break;
    const Vec u = sigma_u * rng.normal_vec(du);
    traj.us.row(t) = u.transpose();
    traj.cs(t) = x.dot(m.Q * x) + u.dot(m.R * u);
    x = m.A * x + m.B * u + process(rng);
  }
  if (keep_oracle) {
    traj.xs = std::move(xs);
    traj.zs = kalman_states(m, traj);
  }
  return traj;
}

/// Stacked H-step histories h_t = [y_{t-H+1}; ...; y_t; u_{t-H}; ...; u_{t-1}]
/// (oldest first within each block) and the regression targets built on them.
/// Row i corresponds to time t = H + i.  Every field is defined on every row,
/// which caps t at N - d_x - 1 so that cbar_{t+1} is available.
struct HistoryDataset {
  Eigen::Index H = 0;
  Eigen::Index lookahead = 0;  // d_x, the cumulative-cost horizon
  Eigen::Index dy = 0, du = 0;
  Mat hs;         // n x d_h
  Vec cbar;       // sum_{tau=t}^{t+d_x-1} (c_tau - |u_tau|_R^2)
  Vec cbar_next;  // cbar_{t+1}
  Mat hu;         // n x (d_h + d_u): [h_t; u_t]
  Mat h_next;     // n x d_h: h_{t+1}
  Mat u_now;      // n x d_u
  Vec c_now;      // n

  Eigen::Index rows() const { return hs.rows(); }
  Eigen::Index dh() const { return hs.cols(); }
  Eigen::Index first_time() const { return H; }

  /// Materialized lifted covariates [svec(h_t h_t^T); 1] (n x (d_h(d_h+1)/2 + 1)).
  Mat lifted() const {
    const auto p = svec_size(dh());
    Mat out(rows(), p + 1);
    Vec buf(p);
    for (Eigen::Index i = 0; i < rows(); ++i) {
      svec_outer(hs.row(i).transpose(), buf);
      out.row(i).head(p) = buf.transpose();
      out(i, p) = 1.0;
    }
    return out;
  }
};

/// History vector at time t (t >= H).
inline Vec history_at(const Trajectory& traj, Eigen::Index t, Eigen::Index H) {
  const auto dy = traj.ys.cols(), du = traj.us.cols();
  Vec h(H * (dy + du));
  for (Eigen::Index k = 0; k < H; ++k) {
    h.segment(k * dy, dy) = traj.ys.row(t - H + 1 + k).transpose();
    h.segment(H * dy + k * du, du) = traj.us.row(t - H + k).transpose();
  }
  return h;
}

inline HistoryDataset build_histories(const Trajectory& traj, Eigen::Index H, Eigen::Index d_x,
                                      const Mat& R) {
  detail::require(H >= 1, "build_histories: H must be >= 1");
  detail::require(d_x >= 1, "build_histories: d_x must be >= 1");
  detail::require(R.rows() == traj.us.cols() && R.cols() == traj.us.cols(),
                  "build_histories: R shape does not match controls");
  const Eigen::Index N = traj.length();
  const Eigen::Index n = N - H - d_x;
  if (n < 1) {
    throw InsufficientDataError("build_histories: trajectory of length " + std::to_string(N) +
                                " leaves no rows for H = " + std::to_string(H) +
                                ", d_x = " + std::to_string(d_x));
  }
  HistoryDataset ds;
  ds.H = H;
  ds.lookahead = d_x;
  ds.dy = traj.ys.cols();
  ds.du = traj.us.cols();
  const Eigen::Index dh = H * (ds.dy + ds.du);

  // State-only part of each stage cost.
  Vec state_cost(N);
  for (Eigen::Index t = 0; t < N; ++t) {
    const Vec u = traj.us.row(t).transpose();
    state_cost(t) = traj.cs(t) - u.dot(R * u);
  }
  auto cumulative = [&](Eigen::Index t) { return state_cost.segment(t, d_x).sum(); };

  ds.hs.resize(n, dh);
  ds.h_next.resize(n, dh);
  ds.hu.resize(n, dh + ds.du);
  ds.u_now.resize(n, ds.du);
  ds.cbar.resize(n);
  ds.cbar_next.resize(n);
  ds.c_now.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index t = H + i;
    const Vec h = history_at(traj, t, H);
    ds.hs.row(i) = h.transpose();
    ds.h_next.row(i) = history_at(traj, t + 1, H).transpose();
    ds.u_now.row(i) = traj.us.row(t);
    ds.hu.row(i).head(dh) = h.transpose();
    ds.hu.row(i).tail(ds.du) = traj.us.row(t);
    ds.cbar(i) = cumulative(t);
    ds.cbar_next(i) = cumulative(t + 1);
    ds.c_now(i) = traj.cs(t);
  }
  return ds;
}

/// M* = [A_bar^{H-1} L, ..., L, A_bar^{H-1} B_bar, ..., B_bar], so that
/// z*_t = M* h_t + A_bar^H z*_{t-H}.
inline Mat optimal_representation(const LqgModel& m, const DerivedGains& g, Eigen::Index H) {
  const auto dx = m.dx(), dy = m.dy(), du = m.du();
  Mat M(dx, H * (dy + du));
  Mat power = Mat::Identity(dx, dx);
  for (Eigen::Index k = H - 1; k >= 0; --k) {
    M.middleCols(k * dy, dy) = power * g.L_star;
    M.middleCols(H * dy + k * du, du) = power * g.B_bar;
    power = (g.A_bar * power).eval();
  }
  return M;
}

struct CostDecomposition {
  double mean_residual = 0.0;  // mean of cbar_t - |z*_t|^2_{Q_bar} - b_analytic
  double std_error = 0.0;         // batch-means standard error of that mean
  double b_empirical = 0.0;    // mean of cbar_t - |z*_t|^2_{Q_bar}
  double b_analytic = 0.0;     // stationary expectation of the same quantity
  Eigen::Index count = 0;
};

/// Checks cbar_t = |z*_t|^2 + b + zero-mean noise on a dataset whose oracle
/// Kalman states `zs` are indexed by absolute time.  In the normalized
/// parameterization Q_bar = I and the weighted norm is the plain norm.
inline CostDecomposition verify_cost_decomposition(const LqgModel& m, const HistoryDataset& ds,
                                                   const Mat& zs, double sigma_u) {
  const Eigen::Index k = ds.lookahead;
  const Mat qbar = cost_gram(m.A, m.Q, k);
  const Eigen::Index n = ds.rows();
  detail::require(zs.rows() >= ds.first_time() + n, "verify_cost_decomposition: zs too short");

  CostDecomposition out;
  out.count = n;
  // Expected cost-to-go beyond |z|^2: posterior error plus the control and
  // process noise injected inside the lookahead window.
  const DerivedGains g = derive_gains(m);
  const Mat post = posterior_covariance(m, g.S_star);
  double b = (qbar.cwiseProduct(post)).sum();
  const Mat drive = sigma_u * sigma_u * m.B * m.B.transpose() + m.Sigma_w;
  // Sum_{step<k} sum_{j<step} tr(Q A^{step-1-j} D A^{step-1-j}^T) equals
  // sum_{l=0}^{k-2} (k-1-l) tr(Q A^l D A^l^T).
  Mat power = Mat::Identity(m.dx(), m.dx());
  for (Eigen::Index lag = 0; lag + 1 < k; ++lag) {
    b += static_cast<double>(k - 1 - lag) *
         (m.Q.cwiseProduct(power * drive * power.transpose())).sum();
    power = (m.A * power).eval();
  }
  out.b_analytic = b;

  Vec resid(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec z = zs.row(ds.first_time() + i).transpose();
    resid(i) = ds.cbar(i) - z.dot(qbar * z);
  }
  out.b_empirical = n ? resid.mean() : 0.0;
  resid.array() -= b;
  out.mean_residual = n ? resid.mean() : 0.0;

  const auto batch = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::sqrt(double(n))));
  const Eigen::Index batches = n / batch;
  if (batches >= 2) {
    Vec means(batches);
    for (Eigen::Index j = 0; j < batches; ++j) means(j) = resid.segment(j * batch, batch).mean();
    const double mu = means.mean();
    const double var = (means.array() - mu).square().sum() / double(batches - 1);
    out.std_error = std::sqrt(var / double(batches));
  }
  return out;
}

/// CSV dump: t,y_0..y_{dy-1},u_0..u_{du-1},c.  The final row carries only y_N.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const auto dy = traj.ys.cols(), du = traj.us.cols();
  os << "t";
  for (Eigen::Index i = 0; i < dy; ++i) os << ",y_" << i;
  for (Eigen::Index i = 0; i < du; ++i) os << ",u_" << i;
  os << ",c\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ',' << buf;
  };
  for (Eigen::Index t = 0; t < traj.ys.rows(); ++t) {
    os << t;
    for (Eigen::Index i = 0; i < dy; ++i) put(traj.ys(t, i));
    if (t < traj.length()) {
      for (Eigen::Index i = 0; i < du; ++i) put(traj.us(t, i));
      put(traj.cs(t));
    } else {
      for (Eigen::Index i = 0; i <= du; ++i) os << ',';
    }
    os << '\n';
  }
}

}  // namespace corel
