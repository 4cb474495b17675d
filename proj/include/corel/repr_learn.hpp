#pragma once

// Cost-driven representation learning: quadratic regression of cumulative
// costs on lifted histories, rank discovery and the Eckart-Young factor.

#include <string>

#include "corel/matstat.hpp"

namespace corel {

struct QuadFit {
  Mat N_hat;                  // symmetric d x d
  double b_hat = 0.0;         // constant offset
  double gram_min_eig = 0.0;  // lambda_min(sum f f^T) / T
  bool rank_flag = false;     // pseudo-inverse cutoff was hit
};

/// Gram matrix sum_t f_t f_t^T and moment sum_t f_t y_t of the lifted
/// covariates f_t = [svec(x_t x_t^T); 1], accumulated in fixed row blocks.
struct LiftedMoments {
  Mat gram;
  Vec moment;
  Eigen::Index count = 0;

  explicit LiftedMoments(Eigen::Index d)
      : gram(Mat::Zero(svec_size(d) + 1, svec_size(d) + 1)),
        moment(Vec::Zero(svec_size(d) + 1)) {}

  template <typename Rows>
  void add(const Rows& covariates, const Vec* targets) {
    constexpr Eigen::Index kBlock = 256;
    const Eigen::Index p = gram.rows();
    const Eigen::Index d = covariates.cols();
    Mat block(p, kBlock);
    Vec buf(p - 1);
    for (Eigen::Index start = 0; start < covariates.rows(); start += kBlock) {
      const Eigen::Index len = std::min(kBlock, covariates.rows() - start);
      for (Eigen::Index r = 0; r < len; ++r) {
        svec_outer(covariates.row(start + r).transpose().head(d), buf);
        block.col(r).head(p - 1) = buf;
        block(p - 1, r) = 1.0;
      }
      const auto cols = block.leftCols(len);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(cols);
      if (targets) moment.noalias() += cols * targets->segment(start, len);
    }
    count += covariates.rows();
  }

  Mat full_gram() const {
    Mat g = gram.selfadjointView<Eigen::Lower>();
    return g;
  }
};

/// Least-squares fit of targets_t ~ x_t^T N x_t + b over symmetric N, solved
/// through the pseudo-inverse of the lifted Gram matrix.
inline QuadFit quadratic_regress(const Mat& covariates, const Vec& targets, double cutoff = 1e-12) {
  if (covariates.rows() == 0) throw ArgumentError("quadratic_regress: zero samples");
  if (covariates.rows() != targets.size()) {
    throw ArgumentError("quadratic_regress: " + std::to_string(covariates.rows()) +
                        " covariate rows vs " + std::to_string(targets.size()) + " targets");
  }
  detail::require_finite(covariates, "quadratic_regress covariates");
  detail::require_finite(targets, "quadratic_regress targets");
  const Eigen::Index d = covariates.cols();
  LiftedMoments mom(d);
  mom.add(covariates, &targets);

  const SymEig e = sym_eig(mom.full_gram());
  const Eigen::Index p = e.values.size();
  const double top = std::max(e.values(0), 0.0);
  Vec coef = Vec::Zero(p);
  bool clipped = covariates.rows() < p;
  const Vec proj = e.vectors.transpose() * mom.moment;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (e.values(i) > cutoff * top && e.values(i) > 0.0) {
      coef += (proj(i) / e.values(i)) * e.vectors.col(i);
    } else {
      clipped = true;
    }
  }
  QuadFit fit;
  fit.N_hat = smat(coef.head(p - 1));
  fit.b_hat = coef(p - 1);
  fit.rank_flag = clipped;
  fit.gram_min_eig = covariates.rows() < p
                         ? 0.0
                         : std::max(0.0, e.values(p - 1)) / double(covariates.rows());
  return fit;
}

/// Number of eigenvalues above threshold_ratio * max eigenvalue.
inline Eigen::Index discover_rank(const Vec& eigvals, double threshold_ratio = 1e-2) {
  if (eigvals.size() == 0) throw ArgumentError("discover_rank: empty spectrum");
  detail::require(threshold_ratio > 0.0 && threshold_ratio < 1.0,
                  "discover_rank: threshold_ratio must lie in (0, 1)");
  const double top = eigvals.maxCoeff();
  if (top <= 0.0) return 0;
  return (eigvals.array() > threshold_ratio * top).count();
}

struct Representation {
  Mat M_hat;  // d_x x d_h
  Vec eigvals;  // full spectrum of N_hat, descending
  Eigen::Index d_x_used = 0;
};

/// Best rank-d_x PSD factor: M = max(Lambda_{d_x}, 0)^{1/2} U_{d_x}^T.
inline Representation factor_psd(const Mat& N_hat, Eigen::Index d_x) {
  detail::require_square(N_hat, "factor_psd");
  if (d_x > N_hat.rows()) {
    throw ArgumentError("factor_psd: d_x = " + std::to_string(d_x) + " exceeds d_h = " +
                        std::to_string(N_hat.rows()));
  }
  detail::require(d_x >= 0, "factor_psd: negative d_x");
  const SymEig e = sym_eig(N_hat);
  Representation rep;
  rep.eigvals = e.values;
  rep.d_x_used = d_x;
  rep.M_hat = e.values.head(d_x).cwiseMax(0.0).cwiseSqrt().asDiagonal() *
              e.vectors.leftCols(d_x).transpose();
  return rep;
}

inline Vec encode(const Mat& M_hat, const Vec& h) {
  if (M_hat.cols() != h.size()) {
    throw ArgumentError("encode: representation expects length " + std::to_string(M_hat.cols()) +
                        ", got " + std::to_string(h.size()));
  }
  return M_hat * h;
}

/// Row-wise encoding of stacked histories (n x d_h) into latents (n x d_x).
inline Mat encode_rows(const Mat& M_hat, const Mat& hs) {
  if (M_hat.cols() != hs.cols()) {
    throw ArgumentError("encode_rows: representation expects " + std::to_string(M_hat.cols()) +
                        " columns, got " + std::to_string(hs.cols()));
  }
  return hs * M_hat.transpose();
}

}  // namespace corel
