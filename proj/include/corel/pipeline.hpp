#pragma once

// End-to-end orchestration: excite, learn the representation, identify the
// latent model, learn the cost, plan and evaluate.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "corel/diagnostics.hpp"

namespace corel {

enum class EvalMode { Analytic, Rollout };

inline std::string to_string(EvalMode e) { return e == EvalMode::Analytic ? "analytic" : "rollout"; }

inline EvalMode parse_eval_mode(std::string_view s) {
  if (s == "analytic") return EvalMode::Analytic;
  if (s == "rollout") return EvalMode::Rollout;
  throw ArgumentError("unknown evaluation mode '" + std::string(s) + "' (expected analytic|rollout)");
}

struct RunConfig {
  std::string model_path;                 // echoed only
  Eigen::Index T = 10000;
  std::optional<Eigen::Index> H;          // empty: derived from rho((I - L C) A)
  double sigma_u = 1.0;
  std::optional<Eigen::Index> d_x;        // empty: discovered from the spectrum of N_hat
  double rank_threshold_ratio = 1e-2;
  Method method = Method::Explicit;
  std::uint64_t seed = 0;
  EvalMode eval = EvalMode::Analytic;
  Eigen::Index T_eval = 0;                // rollout only; 0 picks max(10 burn_in, 1e5)
  Eigen::Index burn_in = 0;               // rollout only; 0 picks default_burn_in(H)
  std::optional<Eigen::Index> cost_horizon;  // empty: d_x if known, else H
};

/// Ground-truth quantities shared by every run on one model.
struct Problem {
  LqgModel model;
  AssumptionReport report;
  DerivedGains gains;
  double J_star = 0.0;
};

inline Problem prepare_problem(const LqgModel& m) {
  Problem p;
  p.model = m;
  p.report = check_assumptions(m);
  if (!p.report.all_pass()) {
    throw ArgumentError("model violates the standing assumptions" +
                        (p.report.note.empty() ? std::string() : ": " + p.report.note));
  }
  p.gains = derive_gains(m);
  p.J_star = optimal_average_cost(m, p.gains);
  return p;
}

/// H = ceil(log(100 T) / log(1 / rho_bar)); falls back to d_x when the
/// filter error dynamics are nilpotent.
inline Eigen::Index auto_history_length(const Problem& p, Eigen::Index T) {
  const double rho = p.report.rho_bar.value;
  if (!(rho > 1e-12)) return p.model.dx();
  const double h = std::ceil(std::log(100.0 * double(T)) / std::log(1.0 / rho));
  return std::max<Eigen::Index>(1, Eigen::Index(h));
}

struct StageTimings {
  double simulate = 0.0;
  double representation = 0.0;
  double identification = 0.0;
  double cost = 0.0;
  double planning = 0.0;
  double evaluation = 0.0;
};

struct RunRecord {
  RunConfig config;
  Eigen::Index H = 0;              // resolved
  Eigen::Index cost_horizon = 0;   // resolved
  Eigen::Index effective_samples = 0;
  double gram_min_eig = 0.0;
  std::optional<Representation> representation;
  std::optional<LatentModel> latent;
  std::optional<Policy> policy;
  std::optional<CosysidTrace> cosysid;
  std::optional<double> J_hat, J_star, gap;
  std::optional<double> rollout_std_error;
  std::optional<LatentErrors> errors;   // only when d_x matches the true dimension
  std::optional<double> A_tilde_err;    // implicit only: unaligned estimate vs truth
  StageTimings timings;
  std::string status = "ok";
  std::string failure;

  bool ok() const { return status == "ok"; }
  Eigen::Index d_x_used() const { return representation ? representation->d_x_used : 0; }
};

namespace detail {

class StageClock {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline void validate_config(const RunConfig& c) {
  if (!(c.sigma_u > 0.0) || !std::isfinite(c.sigma_u)) {
    throw ArgumentError("sigma_u must be positive (no excitation otherwise)");
  }
  if (c.H && *c.H < 1) throw ArgumentError("H must be >= 1");
  if (c.d_x && *c.d_x < 1) throw ArgumentError("d_x must be >= 1");
  if (c.T < 1) throw ArgumentError("T must be positive");
  if (c.cost_horizon && *c.cost_horizon < 1) throw ArgumentError("cost horizon must be >= 1");
  if (!(c.rank_threshold_ratio > 0.0 && c.rank_threshold_ratio < 1.0)) {
    throw ArgumentError("rank_threshold_ratio must lie in (0, 1)");
  }
  if (c.T_eval < 0 || c.burn_in < 0) throw ArgumentError("rollout lengths must be nonnegative");
}

inline std::string status_of(const std::exception& e) {
  if (dynamic_cast<const InsufficientDataError*>(&e)) return "insufficient_data";
  if (dynamic_cast<const PlanningError*>(&e)) return "planning_failed";
  if (dynamic_cast<const InstabilityError*>(&e)) return "unstable";
  if (dynamic_cast<const NonConvergenceError*>(&e)) return "no_convergence";
  if (dynamic_cast<const ObservabilityError*>(&e)) return "unobservable";
  return "error";
}

}  // namespace detail

/// One run of the full pipeline.  Configuration errors throw; stage failures
/// are reported through `status` and `failure` with learned artifacts cleared.
inline RunRecord run_corel(const RunConfig& config, const Problem& prob) {
  detail::validate_config(config);
  const LqgModel& m = prob.model;
  RunRecord rec;
  rec.config = config;
  rec.H = config.H ? *config.H : auto_history_length(prob, config.T);
  rec.cost_horizon = config.cost_horizon ? *config.cost_horizon
                     : config.d_x        ? *config.d_x
                                         : rec.H;
  const Rng root(config.seed);
  detail::StageClock clock;
  try {
    Rng data_rng = root.split(0);
    const Trajectory traj = rollout_excite(m, config.T, rec.H, config.sigma_u, data_rng);
    const HistoryDataset ds = build_histories(traj, rec.H, rec.cost_horizon, m.R);
    rec.effective_samples = ds.rows();
    rec.timings.simulate = clock.lap();

    // The next-step regression does not depend on the representation.
    std::future<QuadFit> next_fit;
    if (config.method == Method::Implicit) {
      next_fit = std::async(std::launch::async, [&ds] { return cosysid_regression(ds); });
    }
    const QuadFit fit = quadratic_regress(ds.hs, ds.cbar);
    rec.gram_min_eig = fit.gram_min_eig;
    const Eigen::Index d_x =
        config.d_x ? *config.d_x : discover_rank(sym_eig(fit.N_hat).values, config.rank_threshold_ratio);
    if (d_x < 1) throw InsufficientDataError("representation regression produced no positive spectrum");
    if (d_x > ds.dh()) throw ArgumentError("d_x exceeds the history dimension");
    const Representation rep = factor_psd(fit.N_hat, d_x);
    rec.representation = rep;
    rec.timings.representation = clock.lap();

    const Mat z_now = encode_rows(rep.M_hat, ds.hs);
    LatentModel latent;
    latent.method = config.method;
    latent.R = m.R;
    if (config.method == Method::Explicit) {
      Mat z_all(ds.rows() + 1, d_x);
      z_all.topRows(ds.rows()) = z_now;
      z_all.bottomRows(1) = encode_rows(rep.M_hat, ds.h_next.bottomRows(1));
      const DynamicsFit dyn = sysid_explicit(z_all, ds.u_now);
      latent.A_hat = dyn.A_hat;
      latent.B_hat = dyn.B_hat;
    } else {
      const CosysidResult cs = cosysid(ds, rep, d_x, next_fit.get());
      latent.A_hat = cs.A_hat;
      latent.B_hat = cs.B_hat;
      rec.cosysid = cs.trace;
    }
    rec.timings.identification = clock.lap();

    const CostFit cost = learn_cost(z_now, ds.u_now, ds.c_now, m.R);
    latent.Q_hat = cost.Q_hat;
    latent.b_hat = cost.b_hat;
    rec.latent = latent;
    rec.timings.cost = clock.lap();

    Policy pol;
    pol.M = rep.M_hat;
    pol.K = plan(latent);
    pol.H = rec.H;
    rec.policy = pol;
    rec.timings.planning = clock.lap();

    rec.J_star = prob.J_star;
    if (config.eval == EvalMode::Analytic) {
      rec.J_hat = evaluate_analytic(m, pol);
    } else {
      const Eigen::Index burn = config.burn_in ? config.burn_in : default_burn_in(rec.H);
      const Eigen::Index T_eval =
          config.T_eval ? config.T_eval : std::max<Eigen::Index>(10 * burn, 100000);
      Rng eval_rng = root.split(1);
      const RolloutEstimate est = evaluate_rollout(m, pol, T_eval, burn, config.sigma_u, eval_rng);
      rec.J_hat = est.mean;
      rec.rollout_std_error = est.std_error;
    }
    rec.gap = *rec.J_hat - *rec.J_star;
    rec.timings.evaluation = clock.lap();

    // Error bookkeeping in the coordinates where the cost Gram matrix is I.
    if (d_x == m.dx()) {
      const NormalizedModel nm = normalize_model(m, rec.cost_horizon);
      const DerivedGains ng = derive_gains(nm.model);
      const Mat M_star = optimal_representation(nm.model, ng, rec.H);
      LearnedArtifacts art{rep.M_hat, latent.A_hat, latent.B_hat, latent.Q_hat, pol.K};
      const LatentErrors err = latent_errors(art, nm.model, ng.K_star, M_star);
      rec.errors = err;
      if (rec.cosysid) {
        rec.A_tilde_err =
            spectral_norm(rec.cosysid->A_tilde - err.S * nm.model.A * err.S.transpose());
      }
    }
  } catch (const ArgumentError&) {
    throw;
  } catch (const std::exception& e) {
    RunRecord failed;
    failed.config = rec.config;
    failed.H = rec.H;
    failed.cost_horizon = rec.cost_horizon;
    failed.effective_samples = rec.effective_samples;
    failed.gram_min_eig = rec.gram_min_eig;
    failed.timings = rec.timings;
    failed.status = detail::status_of(e);
    failed.failure = e.what();
    return failed;
  }
  return rec;
}

inline RunRecord run_corel(const RunConfig& config, const LqgModel& m) {
  detail::validate_config(config);
  return run_corel(config, prepare_problem(m));
}

/// Sort key of a sweep cell.
inline std::tuple<std::string, Eigen::Index, std::uint64_t> sweep_key(const RunRecord& r) {
  return {to_string(r.config.method), r.config.T, r.config.seed};
}

/// Cartesian product of (method, T, seed) on a worker pool.  Output order is
/// by key regardless of scheduling.  threads = 0 uses hardware concurrency.
inline std::vector<RunRecord> run_sweep(const Problem& prob, const std::vector<Eigen::Index>& Ts,
                                        const std::vector<std::uint64_t>& seeds,
                                        const std::vector<Method>& methods,
                                        const RunConfig& common, unsigned threads = 0) {
  if (Ts.empty() || seeds.empty() || methods.empty()) {
    throw ArgumentError("run_sweep: every grid must be nonempty");
  }
  std::vector<RunConfig> cells;
  for (Method meth : methods) {
    for (Eigen::Index T : Ts) {
      for (std::uint64_t s : seeds) {
        RunConfig c = common;
        c.method = meth;
        c.T = T;
        c.seed = s;
        detail::validate_config(c);
        cells.push_back(c);
      }
    }
  }
  std::vector<RunRecord> out(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        out[i] = run_corel(cells[i], prob);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, unsigned(cells.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  std::stable_sort(out.begin(), out.end(), [](const RunRecord& a, const RunRecord& b) {
    return sweep_key(a) < sweep_key(b);
  });
  return out;
}

}  // namespace corel
