#pragma once

// Latent dynamics and cost identification.  Explicit: least squares on
// encoded transitions.  Implicit: regression of next-step cumulative cost on
// [h_t; u_t], factorization, and coordinate alignment.

#include <optional>
#include <string>
#include <string_view>

#include "corel/repr_learn.hpp"
#include "corel/simulate.hpp"

namespace corel {

enum class Method { Explicit, Implicit };

inline std::string to_string(Method m) { return m == Method::Explicit ? "explicit" : "implicit"; }

inline Method parse_method(std::string_view s) {
  if (s == "explicit") return Method::Explicit;
  if (s == "implicit") return Method::Implicit;
  throw ArgumentError("unknown method '" + std::string(s) + "' (expected explicit|implicit)");
}

struct LatentModel {
  Mat A_hat, B_hat, Q_hat, R;
  double b_hat = 0.0;
  Method method = Method::Explicit;
};

struct DynamicsFit {
  Mat A_hat;  // d_x x d_x
  Mat B_hat;  // d_x x d_u
  bool rank_flag = false;
};

/// argmin_{A,B} sum_t |A z_t + B u_t - z_{t+1}|^2 with z_hats holding
/// n + 1 rows (z_0..z_n) and us holding n rows.
inline DynamicsFit sysid_explicit(const Mat& z_hats, const Mat& us) {
  if (z_hats.rows() != us.rows() + 1) {
    throw ArgumentError("sysid_explicit: expected " + std::to_string(us.rows() + 1) +
                        " latent rows, got " + std::to_string(z_hats.rows()));
  }
  const auto n = us.rows(), dx = z_hats.cols(), du = us.cols();
  Mat X(n, dx + du);
  X << z_hats.topRows(n), us;
  const LeastSquaresResult ls = least_squares(X, z_hats.bottomRows(n));
  DynamicsFit fit;
  const Mat W = ls.W.transpose();  // d_x x (d_x + d_u)
  fit.A_hat = W.leftCols(dx);
  fit.B_hat = W.rightCols(du);
  fit.rank_flag = ls.rank_deficient;
  return fit;
}

struct CosysidTrace {
  Mat N1_hat;   // (d_h + d_u) square
  double b1_hat = 0.0;
  Mat M1_hat;   // d_x x (d_h + d_u)
  Mat M_tilde;  // d_x x d_h
  Mat B_tilde;  // d_x x d_u
  Mat A_tilde;  // d_x x d_x, before alignment
  Mat S0_hat;   // alignment matrix
};

struct CosysidResult {
  Mat A_hat, B_hat;
  CosysidTrace trace;
};

/// Next-step cumulative-cost regression on [h_t; u_t].  Independent of the
/// representation regression, so callers may run the two in any order.
inline QuadFit cosysid_regression(const HistoryDataset& ds) {
  return quadratic_regress(ds.hu, ds.cbar_next);
}

/// Factorization, split and alignment given the next-step regression.
inline CosysidResult cosysid(const HistoryDataset& ds, const Representation& rep,
                             Eigen::Index d_x, const QuadFit& next_fit) {
  if (rep.d_x_used != d_x || rep.M_hat.rows() != d_x) {
    throw ArgumentError("cosysid: representation has latent dimension " +
                        std::to_string(rep.M_hat.rows()) + ", requested " + std::to_string(d_x));
  }
  if (rep.M_hat.cols() != ds.dh()) throw ArgumentError("cosysid: representation width mismatch");
  const auto dh = ds.dh();
  CosysidResult out;
  CosysidTrace& tr = out.trace;
  tr.N1_hat = next_fit.N_hat;
  tr.b1_hat = next_fit.b_hat;
  tr.M1_hat = factor_psd(tr.N1_hat, d_x).M_hat;
  tr.M_tilde = tr.M1_hat.leftCols(dh);
  tr.B_tilde = tr.M1_hat.rightCols(ds.du);
  tr.A_tilde = tr.M_tilde * pinv(rep.M_hat, 1e-8);

  // S0 minimizes sum_t |S0 M1 [h_t; u_t] - M h_{t+1}|^2.
  const Mat predicted = encode_rows(tr.M1_hat, ds.hu);
  const Mat observed = encode_rows(rep.M_hat, ds.h_next);
  tr.S0_hat = least_squares(predicted, observed, 1e-10).W.transpose();

  out.A_hat = tr.S0_hat * tr.A_tilde;
  out.B_hat = tr.S0_hat * tr.B_tilde;
  return out;
}

inline CosysidResult cosysid(const HistoryDataset& ds, const Representation& rep,
                             Eigen::Index d_x) {
  if (rep.d_x_used != d_x) {
    throw ArgumentError("cosysid: representation has latent dimension " +
                        std::to_string(rep.d_x_used) + ", requested " + std::to_string(d_x));
  }
  return cosysid(ds, rep, d_x, cosysid_regression(ds));
}

struct CostFit {
  Mat Q_tilde;  // raw regression output
  Mat Q_hat;    // PSD projection
  double b_hat = 0.0;
};

/// Quadratic regression of c_t - |u_t|_R^2 on z_t, then eigenvalue truncation.
inline CostFit learn_cost(const Mat& z_hats, const Mat& us, const Vec& cs, const Mat& R) {
  if (z_hats.rows() != us.rows() || z_hats.rows() != cs.size()) {
    throw ArgumentError("learn_cost: row counts differ");
  }
  Vec targets(cs.size());
  for (Eigen::Index t = 0; t < cs.size(); ++t) {
    const Vec u = us.row(t).transpose();
    targets(t) = cs(t) - u.dot(R * u);
  }
  const QuadFit fit = quadratic_regress(z_hats, targets);
  CostFit out;
  out.Q_tilde = fit.N_hat;
  out.Q_hat = psd_truncate(fit.N_hat);
  out.b_hat = fit.b_hat;
  return out;
}

}  // namespace corel
