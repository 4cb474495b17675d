// Command-line front end.  Exit codes: 0 success, 1 domain failure,
// 2 usage or parse failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "corel/corel.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kDomainFailure = 1;
constexpr int kUsage = 2;

std::optional<Eigen::Index> parse_auto(const std::string& text, const char* flag) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used == text.size()) return Eigen::Index(v);
  } catch (const std::exception&) {
  }
  throw corel::ArgumentError(std::string(flag) + " expects an integer or 'auto', got '" + text + "'");
}

void print_report(const corel::AssumptionReport& r) {
  auto line = [](const char* name, const corel::AssumptionReport::Item& it) {
    std::cout << name << ": " << (it.pass ? "PASS" : "FAIL")
              << " value=" << corel::format_double(it.value) << '\n';
  };
  line("stable", r.stable);
  line("nu", r.nu);
  line("omega", r.omega);
  line("kappa", r.kappa);
  line("mu", r.mu);
  line("sigma_v", r.sigma_v);
  line("r", r.r);
  line("rho_bar", r.rho_bar);
  std::cout << "alpha: " << corel::format_double(r.alpha) << '\n';
  if (!r.note.empty()) std::cout << "note: " << r.note << '\n';
}

struct RunFlags {
  std::string model;
  Eigen::Index T = 10000;
  std::string H = "auto";
  double sigma_u = 1.0;
  std::string method = "explicit";
  std::string d_x = "auto";
  double rank_ratio = 1e-2;
  std::uint64_t seed = 0;
  std::string eval = "analytic";
  Eigen::Index T_eval = 0;
  Eigen::Index burn_in = 0;
  std::string cost_horizon = "auto";
  std::string out;

  void add_common(CLI::App* cmd) {
    cmd->add_option("--model", model, "Model JSON file")->required();
    cmd->add_option("--H", H, "History length or 'auto'");
    cmd->add_option("--sigma-u", sigma_u, "Excitation standard deviation");
    cmd->add_option("--d-x", d_x, "Latent dimension or 'auto'");
    cmd->add_option("--rank-ratio", rank_ratio, "Relative eigenvalue threshold for rank discovery");
    cmd->add_option("--eval", eval, "analytic|rollout");
    cmd->add_option("--T-eval", T_eval, "Rollout length (0: automatic)");
    cmd->add_option("--burn-in", burn_in, "Rollout burn-in (0: automatic)");
    cmd->add_option("--cost-horizon", cost_horizon, "Cumulative-cost horizon or 'auto'");
  }

  corel::RunConfig config() const {
    corel::RunConfig c;
    c.model_path = model;
    c.T = T;
    c.H = parse_auto(H, "--H");
    c.sigma_u = sigma_u;
    c.method = corel::parse_method(method);
    c.d_x = parse_auto(d_x, "--d-x");
    c.rank_threshold_ratio = rank_ratio;
    c.seed = seed;
    c.eval = corel::parse_eval_mode(eval);
    c.T_eval = T_eval;
    c.burn_in = burn_in;
    c.cost_horizon = parse_auto(cost_horizon, "--cost-horizon");
    return c;
  }
};

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    corel::write_text_file(out, text);
  }
}

int cmd_check(const std::string& path) {
  const corel::LqgModel m = corel::load_model(path);
  const corel::AssumptionReport r = corel::check_assumptions(m);
  print_report(r);
  return r.all_pass() ? kOk : kDomainFailure;
}

corel::Problem load_problem(const std::string& path) {
  const corel::LqgModel m = corel::load_model(path);
  const corel::AssumptionReport r = corel::check_assumptions(m);
  if (!r.all_pass()) {
    print_report(r);
    throw corel::Error("model '" + path + "' fails the assumption check");
  }
  return corel::prepare_problem(m);
}

int cmd_run(const RunFlags& f) {
  const corel::Problem prob = load_problem(f.model);
  const corel::RunRecord rec = corel::run_corel(f.config(), prob);
  emit(f.out, corel::record_to_json(rec).dump(2) + "\n");
  std::cout << corel::summary_line(rec) << '\n';
  if (!rec.ok()) {
    std::cerr << "run failed: " << rec.failure << '\n';
    return kDomainFailure;
  }
  return kOk;
}

int cmd_sweep(const RunFlags& f, const std::vector<Eigen::Index>& Ts,
              const std::vector<std::uint64_t>& seeds, const std::vector<std::string>& methods,
              unsigned threads) {
  const corel::Problem prob = load_problem(f.model);
  std::vector<corel::Method> ms;
  for (const auto& s : methods) ms.push_back(corel::parse_method(s));
  const auto records = corel::run_sweep(prob, Ts, seeds, ms, f.config(), threads);
  std::ostringstream csv;
  corel::write_sweep_csv(csv, records);
  emit(f.out, csv.str());
  if (!f.out.empty() && f.out != "-") {
    for (const auto& r : records) std::cout << corel::summary_line(r) << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cost-driven representation learning for LQG control"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads for sweeps (0: hardware concurrency)");

  std::string check_model;
  CLI::App* check = app.add_subcommand("check", "Check the standing assumptions of a model file");
  check->add_option("--model", check_model, "Model JSON file")->required();

  RunFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "Run the pipeline once and write a JSON record");
  run_flags.add_common(run);
  run->add_option("--T", run_flags.T, "Number of samples");
  run->add_option("--method", run_flags.method, "explicit|implicit");
  run->add_option("--seed", run_flags.seed, "Random seed");
  run->add_option("--out", run_flags.out, "Output JSON path")->required();

  RunFlags sweep_flags;
  std::vector<Eigen::Index> sweep_Ts{2500, 10000, 40000};
  std::vector<std::uint64_t> sweep_seeds{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<std::string> sweep_methods{"explicit"};
  CLI::App* sweep = app.add_subcommand("sweep", "Run a (method, T, seed) grid and write CSV");
  sweep_flags.add_common(sweep);
  sweep->add_option("--T", sweep_Ts, "Comma-separated sample counts")->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "Comma-separated seeds")->delimiter(',');
  sweep->add_option("--methods", sweep_methods, "Comma-separated methods")->delimiter(',');
  sweep->add_option("--out", sweep_flags.out, "Output CSV path")->required();
  sweep->add_option("--threads", threads, "Worker threads (0: hardware concurrency)");

  CLI::App* diag = app.add_subcommand("diag", "Diagnostics");
  diag->require_subcommand(1);
  std::string pe_model, pe_out;
  Eigen::Index pe_H = 4;
  double pe_sigma = 1.0;
  std::uint64_t pe_seed = 0;
  std::vector<Eigen::Index> pe_Ts{2000, 8000, 32000};
  CLI::App* pe = diag->add_subcommand("pe", "Persistency-of-excitation curve");
  pe->add_option("--model", pe_model, "Model JSON file")->required();
  pe->add_option("--H", pe_H, "History length");
  pe->add_option("--sigma-u", pe_sigma, "Excitation standard deviation");
  pe->add_option("--T", pe_Ts, "Comma-separated increasing sample counts")->delimiter(',');
  pe->add_option("--seed", pe_seed, "Random seed");
  pe->add_option("--out", pe_out, "Output JSON path (default stdout)");

  Eigen::Index qf_d = 2, qf_trials = 100, qf_samples = 200000;
  std::uint64_t qf_seed = 0;
  std::string qf_out;
  CLI::App* qf = diag->add_subcommand("quadform", "Monte-Carlo check of the quadratic-form bound");
  qf->add_option("--d", qf_d, "Dimension");
  qf->add_option("--trials", qf_trials, "Random unit vectors");
  qf->add_option("--samples", qf_samples, "Monte-Carlo samples per vector");
  qf->add_option("--seed", qf_seed, "Random seed");
  qf->add_option("--out", qf_out, "Output JSON path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*check) return cmd_check(check_model);
    if (*run) return cmd_run(run_flags);
    if (*sweep) return cmd_sweep(sweep_flags, sweep_Ts, sweep_seeds, sweep_methods, threads);
    if (*pe) {
      const corel::Problem prob = load_problem(pe_model);
      corel::Rng rng(pe_seed);
      const corel::PeCurve c = corel::pe_curve(prob.model, pe_H, pe_sigma, pe_Ts, rng);
      emit(pe_out, corel::pe_curve_to_json(c).dump(2) + "\n");
      return kOk;
    }
    if (*qf) {
      corel::Rng rng(qf_seed);
      const corel::QuadformReport r = corel::quadform_lb_mc(qf_d, qf_trials, qf_samples, rng);
      emit(qf_out, corel::quadform_to_json(r).dump(2) + "\n");
      return r.holds() ? kOk : kDomainFailure;
    }
  } catch (const corel::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const corel::ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainFailure;
  }
  return kUsage;
}
