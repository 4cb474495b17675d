#pragma once

// Certainty-equivalent planning and evaluation of history-based policies.

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "corel/latent_id.hpp"

namespace corel {

/// u_t = K M h_t once H steps of history exist.
struct Policy {
  Mat M;  // d_x x d_h
  Mat K;  // d_u x d_x
  Eigen::Index H = 0;
};

inline Mat plan(const LatentModel& latent) {
  Mat P;
  try {
    P = solve_dare(latent.A_hat, latent.B_hat, latent.Q_hat, latent.R);
  } catch (const NonConvergenceError& e) {
    throw PlanningError(std::string("plan: Riccati iteration failed: ") + e.what());
  }
  Mat K = lqr_gain(latent.A_hat, latent.B_hat, latent.Q_hat, latent.R, P);
  const double rho = spectral_radius(latent.A_hat + latent.B_hat * K);
  if (!(rho < 1.0)) {
    throw PlanningError("plan: latent closed loop has spectral radius " + std::to_string(rho));
  }
  return K;
}

namespace detail {

struct AugmentedLoop {
  Mat F;      // transition of s = [x; h]
  Mat noise;  // covariance of the injected noise G [w; v]
  Mat KM;     // d_u x d_h
};

inline AugmentedLoop augmented_loop(const LqgModel& m, const Policy& pol) {
  const auto n = m.dx(), dy = m.dy(), du = m.du(), H = pol.H;
  const Eigen::Index dh = H * (dy + du);
  if (pol.M.cols() != dh || pol.K.rows() != du || pol.K.cols() != pol.M.rows()) {
    throw ArgumentError("policy dimensions do not match the model (d_h = " + std::to_string(dh) +
                        ")");
  }
  AugmentedLoop loop;
  loop.KM = pol.K * pol.M;
  const Mat& KM = loop.KM;
  const Eigen::Index dim = n + dh;
  const Eigen::Index ynew = n + (H - 1) * dy;  // newest y slot
  const Eigen::Index ublk = n + H * dy;         // first u slot
  const Eigen::Index unew = ublk + (H - 1) * du;

  Mat& F = loop.F;
  F = Mat::Zero(dim, dim);
  F.topLeftCorner(n, n) = m.A;
  F.block(0, n, n, dh) = m.B * KM;
  for (Eigen::Index k = 0; k + 1 < H; ++k) {
    F.block(n + k * dy, n + (k + 1) * dy, dy, dy).setIdentity();
    F.block(ublk + k * du, ublk + (k + 1) * du, du, du).setIdentity();
  }
  F.block(ynew, 0, dy, n) = m.C * m.A;
  F.block(ynew, n, dy, dh) = m.C * m.B * KM;
  F.block(unew, n, du, dh) = KM;

  Mat G = Mat::Zero(dim, n + dy);
  G.topLeftCorner(n, n).setIdentity();
  G.block(ynew, 0, dy, n) = m.C;
  G.block(ynew, n, dy, dy).setIdentity();
  Mat w = Mat::Zero(n + dy, n + dy);
  w.topLeftCorner(n, n) = m.Sigma_w;
  w.bottomRightCorner(dy, dy) = m.Sigma_v;
  loop.noise = G * w * G.transpose();
  return loop;
}

}  // namespace detail

/// Spectral radius of the closed loop over [x; h].
inline double closed_loop_radius(const LqgModel& m, const Policy& pol) {
  return spectral_radius(detail::augmented_loop(m, pol).F);
}

/// Exact stationary average cost of a linear history policy.
inline double evaluate_analytic(const LqgModel& m, const Policy& pol) {
  const detail::AugmentedLoop loop = detail::augmented_loop(m, pol);
  const double rho = spectral_radius(loop.F);
  if (!(rho < 1.0 - 1e-6)) {
    throw InstabilityError("evaluate_analytic: closed loop spectral radius " +
                               std::to_string(rho),
                           rho);
  }
  const Mat sigma = solve_lyapunov(loop.F, loop.noise);
  const auto n = m.dx();
  const Mat sxx = sigma.topLeftCorner(n, n);
  const Mat shh = sigma.bottomRightCorner(sigma.rows() - n, sigma.rows() - n);
  return m.Q.cwiseProduct(sxx).sum() +
         m.R.cwiseProduct(loop.KM * shh * loop.KM.transpose()).sum();
}

inline double suboptimality_gap(const LqgModel& m, const Policy& pol, double j_star) {
  return evaluate_analytic(m, pol) - j_star;
}

inline double suboptimality_gap(const LqgModel& m, const Policy& pol) {
  return suboptimality_gap(m, pol, optimal_average_cost(m));
}

inline Eigen::Index default_burn_in(Eigen::Index H) { return std::max<Eigen::Index>(10 * H, 500); }

struct RolloutEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // batch means
  Eigen::Index samples = 0;
};

namespace detail {

class CostAverager {
 public:
  CostAverager(Eigen::Index burn_in, Eigen::Index total)
      : burn_in_(burn_in), batch_(std::max<Eigen::Index>(1, (total - burn_in) / 100)) {}

  void add(Eigen::Index t, double c) {
    if (t < burn_in_) return;
    sum_ += c;
    ++count_;
    batch_sum_ += c;
    if (++batch_fill_ == batch_) {
      batches_.push_back(batch_sum_ / double(batch_));
      batch_sum_ = 0.0;
      batch_fill_ = 0;
    }
    if (!std::isfinite(sum_) || sum_ / double(count_) > 1e12) {
      throw InstabilityError("evaluate_rollout: running average cost diverged",
                             std::numeric_limits<double>::infinity());
    }
  }

  RolloutEstimate result() const {
    RolloutEstimate r;
    r.samples = count_;
    r.mean = count_ ? sum_ / double(count_) : 0.0;
    const auto b = static_cast<double>(batches_.size());
    if (batches_.size() >= 2) {
      double mu = 0.0;
      for (double v : batches_) mu += v;
      mu /= b;
      double var = 0.0;
      for (double v : batches_) var += (v - mu) * (v - mu);
      r.std_error = std::sqrt(var / (b - 1.0) / b);
    }
    return r;
  }

 private:
  Eigen::Index burn_in_, batch_;
  double sum_ = 0.0, batch_sum_ = 0.0;
  Eigen::Index count_ = 0, batch_fill_ = 0;
  std::vector<double> batches_;
};

}  // namespace detail

/// Time-average cost over [burn_in, T_eval) of a history policy; the first
/// H steps use N(0, sigma_u^2 I) excitation.
inline RolloutEstimate evaluate_rollout(const LqgModel& m, const Policy& pol, Eigen::Index T_eval,
                                        Eigen::Index burn_in, double sigma_u, Rng& rng) {
  detail::require(T_eval >= 10 * burn_in && T_eval > burn_in,
                  "evaluate_rollout: T_eval must be at least 10 * burn_in");
  const auto dy = m.dy(), du = m.du(), H = pol.H;
  if (pol.M.cols() != H * (dy + du)) throw ArgumentError("evaluate_rollout: policy width");
  const Mat KM = pol.K * pol.M;
  const GaussianSampler init(Vec::Zero(m.dx()), m.Sigma_0);
  const GaussianSampler process(Vec::Zero(m.dx()), m.Sigma_w);
  const GaussianSampler sensor(Vec::Zero(dy), m.Sigma_v);

  Mat ys(T_eval + 1, dy), us(T_eval, du);
  detail::CostAverager avg(burn_in, T_eval);
  Vec x = init(rng);
  Vec h(H * (dy + du));
  for (Eigen::Index t = 0; t < T_eval; ++t) {
    ys.row(t) = (m.C * x + sensor(rng)).transpose();
    Vec u;
    if (t < H) {
      u = sigma_u * rng.normal_vec(du);
    } else {
      for (Eigen::Index k = 0; k < H; ++k) {
        h.segment(k * dy, dy) = ys.row(t - H + 1 + k).transpose();
        h.segment(H * dy + k * du, du) = us.row(t - H + k).transpose();
      }
      u = KM * h;
    }
    us.row(t) = u.transpose();
    avg.add(t, x.dot(m.Q * x) + u.dot(m.R * u));
    x = m.A * x + m.B * u + process(rng);
  }
  return avg.result();
}

/// Rollout of the separation-principle controller u = K* z*, z*_0 = L* y_0.
inline RolloutEstimate evaluate_rollout_optimal(const LqgModel& m, const DerivedGains& g,
                                                Eigen::Index T_eval, Eigen::Index burn_in,
                                                Rng& rng) {
  detail::require(T_eval > burn_in, "evaluate_rollout_optimal: T_eval must exceed burn_in");
  const GaussianSampler init(Vec::Zero(m.dx()), m.Sigma_0);
  const GaussianSampler process(Vec::Zero(m.dx()), m.Sigma_w);
  const GaussianSampler sensor(Vec::Zero(m.dy()), m.Sigma_v);
  detail::CostAverager avg(burn_in, T_eval);
  Vec x = init(rng);
  Vec z = g.L_star * (m.C * x + sensor(rng));
  for (Eigen::Index t = 0; t < T_eval; ++t) {
    const Vec u = g.K_star * z;
    avg.add(t, x.dot(m.Q * x) + u.dot(m.R * u));
    x = m.A * x + m.B * u + process(rng);
    const Vec y = m.C * x + sensor(rng);
    z = g.A_bar * z + g.B_bar * u + g.L_star * y;
  }
  return avg.result();
}

}  // namespace corel
