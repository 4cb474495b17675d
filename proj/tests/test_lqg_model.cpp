#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace corel;
using namespace testutil;

namespace {

// Positive root of x^2 = beta x + gamma.
double positive_root(double beta, double gamma) {
  return 0.5 * (beta + std::sqrt(beta * beta + 4.0 * gamma));
}

}  // namespace

TEST(Dare, ScalarClosedForm) {
  // a = 0.5, b = q = r = 1: p = a^2 p r / (b^2 p + r) + q reduces to p^2 = a^2 p + q r / b^2.
  const Mat P = solve_dare(Mat::Constant(1, 1, 0.5), Mat::Constant(1, 1, 1.0),
                           Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1.0));
  EXPECT_NEAR(P(0, 0), positive_root(0.25, 1.0), 1e-9);
  EXPECT_NEAR(P(0, 0), 1.1327822, 1e-7);
}

TEST(Dare, NoControlIsLyapunov) {
  Rng rng(1);
  const Mat A = random_stable(rng, 3, 0.7);
  const Mat Q = random_spd(rng, 3);
  const Mat P = solve_dare(A, Mat::Zero(3, 1), Q, Mat::Identity(1, 1));
  EXPECT_LE((P - solve_lyapunov(A.transpose(), Q)).norm(), 1e-10);
}

TEST(Dare, RandomResidual) {
  Rng rng(2);
  for (int k = 0; k < 5; ++k) {
    const LqgModel m = random_model(rng, 4, 2, 3);
    const Mat P = solve_dare(m.A, m.B, m.Q, m.R);
    EXPECT_LE(dare_residual(m.A, m.B, m.Q, m.R, P), 1e-10);
    const Mat S = filter_riccati(m);
    EXPECT_LE(dare_residual(m.A.transpose(), m.C.transpose(), m.Sigma_w, m.Sigma_v, S), 1e-10);
  }
}

TEST(Dare, Monotone) {
  Rng rng(3);
  for (int k = 0; k < 5; ++k) {
    const LqgModel m = random_model(rng, 3, 1, 2);
    const Mat P1 = solve_dare(m.A, m.B, m.Q, m.R);
    const Mat P2 = solve_dare(m.A, m.B, m.Q + random_spd(rng, 3, 0.0), m.R);
    EXPECT_GE(P2.trace(), P1.trace() - 1e-12);
  }
}

TEST(FilterRiccati, ScalarClosedForm) {
  const LqgModel m = scalar_model(0.9, 1, 1, 1, 1, 1, 1);
  const Mat S = filter_riccati(m);
  EXPECT_NEAR(S(0, 0), positive_root(0.81, 1.0), 1e-9);
  EXPECT_NEAR(S(0, 0), 1.4838999, 1e-7);
  const double s = S(0, 0);
  EXPECT_NEAR(kalman_gain(m, S)(0, 0), s / (s + 1.0), 1e-12);
  EXPECT_NEAR(kalman_gain(m, S)(0, 0), 0.5974073, 1e-7);
}

TEST(FilterRiccati, ZeroDynamicsGivesProcessNoise) {
  Rng rng(4);
  LqgModel m = random_model(rng, 3, 1, 2);
  m.A.setZero();
  EXPECT_LE((filter_riccati(m) - m.Sigma_w).norm(), 1e-12);
}

TEST(FilterRiccati, DualityWithControlDare) {
  Rng rng(5);
  const LqgModel m = random_model(rng, 3, 2, 2);
  const Mat S = filter_riccati(m);
  const Mat S2 = solve_dare(m.A.transpose(), m.C.transpose(), m.Sigma_w, m.Sigma_v);
  EXPECT_LE((S - S2).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(KalmanGain, ZeroCovarianceAndSingularInnovation) {
  Rng rng(6);
  LqgModel m = random_model(rng, 2, 1, 2);
  EXPECT_EQ(kalman_gain(m, Mat::Zero(2, 2)), Mat::Zero(2, 2));
  m.Sigma_v.setZero();
  m.C.setZero();
  EXPECT_THROW(kalman_gain(m, Mat::Identity(2, 2)), ArgumentError);
}

TEST(LqrGain, ScalarAndDegenerate) {
  const double p = positive_root(0.25, 1.0);
  const Mat K = lqr_gain(Mat::Constant(1, 1, 0.5), Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1.0),
                         Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, p));
  EXPECT_NEAR(K(0, 0), -p * 0.5 / (1.0 + p), 1e-12);
  EXPECT_NEAR(K(0, 0), -0.2655644, 1e-7);

  Rng rng(7);
  const LqgModel m = random_model(rng, 3, 2, 2);
  EXPECT_EQ(lqr_gain(m.A, m.B, m.Q, m.R, Mat::Zero(3, 3)), Mat::Zero(2, 3));
  EXPECT_EQ(lqr_gain(m.A, Mat::Zero(3, 2), m.Q, m.R, Mat::Identity(3, 3)), Mat::Zero(2, 3));
}

TEST(CostGram, Examples) {
  Rng rng(8);
  const Mat Q = random_spd(rng, 3);
  EXPECT_LE((cost_gram(Mat::Zero(3, 3), Q, 3) - Q).norm(), 1e-15);
  EXPECT_LE((cost_gram(Mat::Identity(3, 3), Mat::Identity(3, 3), 3) - 3.0 * Mat::Identity(3, 3)).norm(),
            1e-15);
  EXPECT_NEAR(cost_gram(Mat::Constant(1, 1, 0.5), Mat::Constant(1, 1, 1.0), 2)(0, 0), 1.25, 1e-15);
}

TEST(Normalize, ScalarZeroDynamics) {
  const LqgModel m = scalar_model(0.0, 1, 1, 4, 1, 1, 1);
  const NormalizedModel n = normalize_model(m);
  EXPECT_NEAR(n.transform(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(n.model.Q(0, 0), 1.0, 1e-14);
}

TEST(Normalize, GramBecomesIdentityAndIdempotent) {
  Rng rng(9);
  for (int k = 0; k < 5; ++k) {
    const LqgModel m = random_model(rng, 3, 1, 2);
    const NormalizedModel n = normalize_model(m);
    EXPECT_LE((cost_gram(n.model.A, n.model.Q, 3) - Mat::Identity(3, 3)).norm(), 1e-9);
    const NormalizedModel twice = normalize_model(n.model);
    EXPECT_LE((twice.transform - Mat::Identity(3, 3)).norm(), 1e-9);
    EXPECT_LE((twice.model.A - n.model.A).norm(), 1e-9);
    EXPECT_LE((twice.model.Sigma_w - n.model.Sigma_w).norm(), 1e-9);
  }
}

TEST(Normalize, SingularGramThrows) {
  LqgModel m = scalar_model(0.5, 1, 1, 0.0, 1, 1, 1);
  EXPECT_THROW(normalize_model(m), ObservabilityError);
}

TEST(Normalize, CostsInvariantUnderChangeOfCoordinates) {
  Rng rng(10);
  const LqgModel m = random_model(rng, 3, 1, 2);
  const NormalizedModel n = normalize_model(m);
  EXPECT_NEAR(optimal_average_cost(m), optimal_average_cost(n.model), 1e-9);
}

TEST(Assumptions, ControllabilityExample) {
  LqgModel m;
  m.A = 0.5 * Mat::Identity(2, 2);
  m.B = Mat::Identity(2, 2);
  m.C = Mat::Identity(2, 2);
  m.Q = m.R = m.Sigma_w = m.Sigma_v = m.Sigma_0 = Mat::Identity(2, 2);
  const AssumptionReport r = check_assumptions(m);
  // [I, 0.5 I] has both singular values sqrt(1 + 0.25).
  EXPECT_NEAR(r.nu.value, std::sqrt(1.25), 1e-12);
  EXPECT_NEAR(r.nu.value, 1.118, 1e-3);
  EXPECT_TRUE(r.all_pass());
}

TEST(Assumptions, UnstableFlagged) {
  LqgModel m = scalar_model(1.01, 1, 1, 1, 1, 1, 1);
  const AssumptionReport r = check_assumptions(m);
  EXPECT_FALSE(r.stable.pass);
  EXPECT_FALSE(r.all_pass());
}

TEST(Assumptions, ReferenceModelPasses) {
  const AssumptionReport r = check_assumptions(reference_model());
  EXPECT_TRUE(r.all_pass());
  EXPECT_NEAR(r.stable.value, 0.8, 1e-12);
  EXPECT_LT(r.rho_bar.value, 0.5);
}

TEST(Assumptions, ClosedLoopsStableAndGramPositive) {
  Rng rng(11);
  for (int k = 0; k < 10; ++k) {
    const LqgModel m = random_model(rng, 3, 1, 2);
    if (!check_assumptions(m).all_pass()) continue;
    const DerivedGains g = derive_gains(m);
    EXPECT_LT(spectral_radius(m.A + m.B * g.K_star), 1.0);
    EXPECT_LT(spectral_radius(g.A_bar), 1.0);
    EXPECT_GT(lambda_min(g.Q_bar), 0.0);
  }
}

TEST(OptimalCost, NoiselessIsZero) {
  LqgModel m = reference_model();
  m.Sigma_w.setZero();
  m.Sigma_0.setZero();
  // The filter needs a nonsingular innovation, so keep a tiny sensor noise
  // that never enters the state.
  m.Sigma_v = 1e-12 * Mat::Identity(2, 2);
  EXPECT_NEAR(optimal_average_cost(m), 0.0, 1e-12);
}

TEST(OptimalCost, FullObservationLimit) {
  LqgModel m = reference_model();
  m.Sigma_v = 1e-4 * Mat::Identity(2, 2);
  const DerivedGains g = derive_gains(m);
  const double lqr = (g.P_star.cwiseProduct(m.Sigma_w)).sum();
  EXPECT_NEAR(optimal_average_cost(m, g) / lqr, 1.0, 0.01);
}

TEST(OptimalCost, ScalarRolloutAgreement) {
  const LqgModel m = scalar_model(0.5, 1, 1, 1, 1, 1, 1);
  const DerivedGains g = derive_gains(m);
  Rng rng(12);
  const RolloutEstimate est = evaluate_rollout_optimal(m, g, 1000000, 500, rng);
  EXPECT_NEAR(est.mean / optimal_average_cost(m, g), 1.0, 0.02);
}

TEST(TransientConstant, NilpotentAndNormal) {
  Mat nil(2, 2);
  nil << 0, 3, 0, 0;
  EXPECT_NEAR(transient_constant(nil), 3.0, 1e-12);
  EXPECT_NEAR(transient_constant(0.5 * Mat::Identity(2, 2)), 1.0, 1e-12);
}

TEST(LqgModel, ValidateRejectsBadShapes) {
  LqgModel m = reference_model();
  m.Q = Mat::Identity(3, 3);
  EXPECT_THROW(m.validate(), ArgumentError);
}
