#pragma once

// JSON and CSV interchange: model files, run records, diagnostic reports and
// sweep tables.  Doubles are written so that they re-parse to the same bits.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "corel/pipeline.hpp"

namespace corel {

using Json = nlohmann::json;

/// Malformed input file.  line/column are 1-based; 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(what), line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_, column_;
};

/// "%.17g", with nan/inf spelled out.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Matrices

inline Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const Json& j, const std::string& name) {
  if (!j.is_array()) throw ParseError("'" + name + "' must be a nested array");
  if (j.empty()) return Mat(0, 0);
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  Mat m(Eigen::Index(j.size()), Eigen::Index(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Json& row = j[i];
    if (!row.is_array() || row.size() != cols) {
      throw ParseError("'" + name + "' row " + std::to_string(i) + " is not an array of length " +
                       std::to_string(cols));
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (!row[k].is_number()) {
        throw ParseError("'" + name + "' entry (" + std::to_string(i) + ", " + std::to_string(k) +
                         ") is not a number");
      }
      m(Eigen::Index(i), Eigen::Index(k)) = row[k].get<double>();
    }
  }
  return m;
}

inline Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Vec vec_from_json(const Json& j, const std::string& name) {
  if (!j.is_array()) throw ParseError("'" + name + "' must be an array");
  Vec v(Eigen::Index(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError("'" + name + "' entry is not a number");
    v(Eigen::Index(i)) = j[i].get<double>();
  }
  return v;
}

/// NaN and infinities have no JSON spelling; they are stored as null.
inline Json num_to_json(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline double num_from_json(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

namespace detail {

inline const Json& field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing key '") + key + "'");
  return *it;
}

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

/// Parse JSON text, mapping syntax errors to ParseError with line/column.
inline Json parse_json_text(const std::string& text, const std::string& source = "<input>") {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte);
    throw ParseError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                         ": malformed JSON",
                     line, col);
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Model files

inline Json model_to_json(const LqgModel& m) {
  Json j;
  j["A"] = mat_to_json(m.A);
  j["B"] = mat_to_json(m.B);
  j["C"] = mat_to_json(m.C);
  j["Q"] = mat_to_json(m.Q);
  j["R"] = mat_to_json(m.R);
  j["Sigma_w"] = mat_to_json(m.Sigma_w);
  j["Sigma_v"] = mat_to_json(m.Sigma_v);
  j["Sigma_0"] = mat_to_json(m.Sigma_0);
  return j;
}

inline LqgModel model_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("model file must hold a JSON object");
  LqgModel m;
  m.A = mat_from_json(detail::field(j, "A"), "A");
  m.B = mat_from_json(detail::field(j, "B"), "B");
  m.C = mat_from_json(detail::field(j, "C"), "C");
  m.Q = mat_from_json(detail::field(j, "Q"), "Q");
  m.R = mat_from_json(detail::field(j, "R"), "R");
  m.Sigma_w = mat_from_json(detail::field(j, "Sigma_w"), "Sigma_w");
  m.Sigma_v = mat_from_json(detail::field(j, "Sigma_v"), "Sigma_v");
  m.Sigma_0 = mat_from_json(detail::field(j, "Sigma_0"), "Sigma_0");
  try {
    m.validate();
  } catch (const ArgumentError& e) {
    throw ParseError(std::string("invalid model: ") + e.what());
  }
  return m;
}

inline LqgModel load_model(const std::string& path) {
  return model_from_json(parse_json_text(read_text_file(path), path));
}

// ---------------------------------------------------------------------------
// Assumption report

inline Json report_to_json(const AssumptionReport& r) {
  auto item = [](const AssumptionReport::Item& it) {
    return Json{{"pass", it.pass}, {"value", num_to_json(it.value)}};
  };
  Json j;
  j["stable"] = item(r.stable);
  j["nu"] = item(r.nu);
  j["omega"] = item(r.omega);
  j["kappa"] = item(r.kappa);
  j["mu"] = item(r.mu);
  j["sigma_v"] = item(r.sigma_v);
  j["r"] = item(r.r);
  j["rho_bar"] = item(r.rho_bar);
  j["alpha"] = num_to_json(r.alpha);
  j["note"] = r.note;
  j["all_pass"] = r.all_pass();
  return j;
}

// ---------------------------------------------------------------------------
// Run records

inline Json config_to_json(const RunConfig& c) {
  Json j;
  j["model_path"] = c.model_path;
  j["T"] = c.T;
  j["H"] = c.H ? Json(*c.H) : Json("auto");
  j["sigma_u"] = c.sigma_u;
  j["d_x"] = c.d_x ? Json(*c.d_x) : Json("auto");
  j["rank_threshold_ratio"] = c.rank_threshold_ratio;
  j["method"] = to_string(c.method);
  j["seed"] = c.seed;
  j["eval"] = to_string(c.eval);
  j["T_eval"] = c.T_eval;
  j["burn_in"] = c.burn_in;
  j["cost_horizon"] = c.cost_horizon ? Json(*c.cost_horizon) : Json("auto");
  return j;
}

inline RunConfig config_from_json(const Json& j) {
  using detail::field;
  auto opt_index = [](const Json& v) -> std::optional<Eigen::Index> {
    if (v.is_string() && v.get<std::string>() == "auto") return std::nullopt;
    return v.get<Eigen::Index>();
  };
  RunConfig c;
  c.model_path = field(j, "model_path").get<std::string>();
  c.T = field(j, "T").get<Eigen::Index>();
  c.H = opt_index(field(j, "H"));
  c.sigma_u = field(j, "sigma_u").get<double>();
  c.d_x = opt_index(field(j, "d_x"));
  c.rank_threshold_ratio = field(j, "rank_threshold_ratio").get<double>();
  c.method = parse_method(field(j, "method").get<std::string>());
  c.seed = field(j, "seed").get<std::uint64_t>();
  c.eval = parse_eval_mode(field(j, "eval").get<std::string>());
  c.T_eval = field(j, "T_eval").get<Eigen::Index>();
  c.burn_in = field(j, "burn_in").get<Eigen::Index>();
  c.cost_horizon = opt_index(field(j, "cost_horizon"));
  return c;
}

inline Json opt_num(const std::optional<double>& v) { return v ? num_to_json(*v) : Json(nullptr); }

inline std::optional<double> opt_num_from(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

/// Timings are wall-clock and therefore left out unless requested, which
/// keeps written records byte-identical across reruns.
inline Json record_to_json(const RunRecord& r, bool include_timings = false) {
  Json j;
  j["config"] = config_to_json(r.config);
  j["status"] = r.status;
  j["failure"] = r.failure;
  j["H"] = r.H;
  j["cost_horizon"] = r.cost_horizon;
  j["effective_samples"] = r.effective_samples;
  j["gram_min_eig"] = num_to_json(r.gram_min_eig);
  j["d_x_used"] = r.d_x_used();
  if (r.representation) {
    j["representation"] = {{"M_hat", mat_to_json(r.representation->M_hat)},
                           {"eigvals", vec_to_json(r.representation->eigvals)},
                           {"d_x_used", r.representation->d_x_used}};
  } else {
    j["representation"] = nullptr;
  }
  if (r.latent) {
    j["latent_model"] = {{"A_hat", mat_to_json(r.latent->A_hat)},
                         {"B_hat", mat_to_json(r.latent->B_hat)},
                         {"Q_hat", mat_to_json(r.latent->Q_hat)},
                         {"R", mat_to_json(r.latent->R)},
                         {"b_hat", num_to_json(r.latent->b_hat)},
                         {"method", to_string(r.latent->method)}};
  } else {
    j["latent_model"] = nullptr;
  }
  if (r.policy) {
    j["policy"] = {{"M", mat_to_json(r.policy->M)},
                   {"K", mat_to_json(r.policy->K)},
                   {"H", r.policy->H}};
  } else {
    j["policy"] = nullptr;
  }
  if (r.cosysid) {
    const CosysidTrace& t = *r.cosysid;
    j["cosysid_trace"] = {{"N1_hat", mat_to_json(t.N1_hat)}, {"b1_hat", num_to_json(t.b1_hat)},
                          {"M1_hat", mat_to_json(t.M1_hat)}, {"M_tilde", mat_to_json(t.M_tilde)},
                          {"B_tilde", mat_to_json(t.B_tilde)}, {"A_tilde", mat_to_json(t.A_tilde)},
                          {"S0_hat", mat_to_json(t.S0_hat)}};
  } else {
    j["cosysid_trace"] = nullptr;
  }
  j["J_hat"] = opt_num(r.J_hat);
  j["J_star"] = opt_num(r.J_star);
  j["gap"] = opt_num(r.gap);
  j["rollout_std_error"] = opt_num(r.rollout_std_error);
  if (r.errors) {
    const LatentErrors& e = *r.errors;
    j["errors"] = {{"M_err", num_to_json(e.M_err)}, {"A_err", num_to_json(e.A_err)},
                   {"B_err", num_to_json(e.B_err)}, {"Q_err", num_to_json(e.Q_err)},
                   {"K_err", num_to_json(e.K_err)}, {"S", mat_to_json(e.S)}};
  } else {
    j["errors"] = nullptr;
  }
  j["A_tilde_err"] = opt_num(r.A_tilde_err);
  if (include_timings) {
    const StageTimings& t = r.timings;
    j["timings"] = {{"simulate", t.simulate},     {"representation", t.representation},
                    {"identification", t.identification}, {"cost", t.cost},
                    {"planning", t.planning},     {"evaluation", t.evaluation}};
  }
  return j;
}

inline RunRecord record_from_json(const Json& j) {
  using detail::field;
  RunRecord r;
  r.config = config_from_json(field(j, "config"));
  r.status = field(j, "status").get<std::string>();
  r.failure = field(j, "failure").get<std::string>();
  r.H = field(j, "H").get<Eigen::Index>();
  r.cost_horizon = field(j, "cost_horizon").get<Eigen::Index>();
  r.effective_samples = field(j, "effective_samples").get<Eigen::Index>();
  r.gram_min_eig = num_from_json(field(j, "gram_min_eig"));
  if (const Json& rep = field(j, "representation"); !rep.is_null()) {
    Representation x;
    x.M_hat = mat_from_json(field(rep, "M_hat"), "M_hat");
    x.eigvals = vec_from_json(field(rep, "eigvals"), "eigvals");
    x.d_x_used = field(rep, "d_x_used").get<Eigen::Index>();
    r.representation = x;
  }
  if (const Json& lm = field(j, "latent_model"); !lm.is_null()) {
    LatentModel x;
    x.A_hat = mat_from_json(field(lm, "A_hat"), "A_hat");
    x.B_hat = mat_from_json(field(lm, "B_hat"), "B_hat");
    x.Q_hat = mat_from_json(field(lm, "Q_hat"), "Q_hat");
    x.R = mat_from_json(field(lm, "R"), "R");
    x.b_hat = num_from_json(field(lm, "b_hat"));
    x.method = parse_method(field(lm, "method").get<std::string>());
    r.latent = x;
  }
  if (const Json& p = field(j, "policy"); !p.is_null()) {
    Policy x;
    x.M = mat_from_json(field(p, "M"), "M");
    x.K = mat_from_json(field(p, "K"), "K");
    x.H = field(p, "H").get<Eigen::Index>();
    r.policy = x;
  }
  if (const Json& t = field(j, "cosysid_trace"); !t.is_null()) {
    CosysidTrace x;
    x.N1_hat = mat_from_json(field(t, "N1_hat"), "N1_hat");
    x.b1_hat = num_from_json(field(t, "b1_hat"));
    x.M1_hat = mat_from_json(field(t, "M1_hat"), "M1_hat");
    x.M_tilde = mat_from_json(field(t, "M_tilde"), "M_tilde");
    x.B_tilde = mat_from_json(field(t, "B_tilde"), "B_tilde");
    x.A_tilde = mat_from_json(field(t, "A_tilde"), "A_tilde");
    x.S0_hat = mat_from_json(field(t, "S0_hat"), "S0_hat");
    r.cosysid = x;
  }
  r.J_hat = opt_num_from(j, "J_hat");
  r.J_star = opt_num_from(j, "J_star");
  r.gap = opt_num_from(j, "gap");
  r.rollout_std_error = opt_num_from(j, "rollout_std_error");
  if (const Json& e = field(j, "errors"); !e.is_null()) {
    LatentErrors x;
    x.M_err = num_from_json(field(e, "M_err"));
    x.A_err = num_from_json(field(e, "A_err"));
    x.B_err = num_from_json(field(e, "B_err"));
    x.Q_err = num_from_json(field(e, "Q_err"));
    x.K_err = num_from_json(field(e, "K_err"));
    x.S = mat_from_json(field(e, "S"), "S");
    r.errors = x;
  }
  r.A_tilde_err = opt_num_from(j, "A_tilde_err");
  if (auto it = j.find("timings"); it != j.end()) {
    r.timings.simulate = field(*it, "simulate").get<double>();
    r.timings.representation = field(*it, "representation").get<double>();
    r.timings.identification = field(*it, "identification").get<double>();
    r.timings.cost = field(*it, "cost").get<double>();
    r.timings.planning = field(*it, "planning").get<double>();
    r.timings.evaluation = field(*it, "evaluation").get<double>();
  }
  return r;
}

// ---------------------------------------------------------------------------
// Diagnostics

inline Json pe_curve_to_json(const PeCurve& c) {
  Json ts = Json::array(), eigs = Json::array();
  for (auto T : c.Ts) ts.push_back(T);
  for (double v : c.min_eigs) eigs.push_back(v);
  return {{"Ts", ts}, {"min_eigs", eigs}, {"slope", num_to_json(c.slope)}};
}

inline PeCurve pe_curve_from_json(const Json& j) {
  PeCurve c;
  for (const Json& t : detail::field(j, "Ts")) c.Ts.push_back(t.get<Eigen::Index>());
  for (const Json& v : detail::field(j, "min_eigs")) c.min_eigs.push_back(v.get<double>());
  c.slope = num_from_json(detail::field(j, "slope"));
  return c;
}

inline Json mc_to_json(const McEstimate& e) {
  return {{"mean", num_to_json(e.mean)}, {"std_error", num_to_json(e.std_error)}};
}

inline McEstimate mc_from_json(const Json& j) {
  return {num_from_json(detail::field(j, "mean")), num_from_json(detail::field(j, "std_error"))};
}

inline Json quadform_to_json(const QuadformReport& r) {
  Json probes = Json::array();
  for (const auto& p : r.probes) probes.push_back({{"name", p.name}, {"estimate", mc_to_json(p.estimate)}});
  return {{"d", r.d},
          {"trials", r.trials},
          {"samples", r.samples},
          {"bound", r.bound},
          {"worst_random", mc_to_json(r.worst_random)},
          {"worst_overall", mc_to_json(r.worst_overall)},
          {"probes", probes},
          {"holds", r.holds()}};
}

inline QuadformReport quadform_from_json(const Json& j) {
  using detail::field;
  QuadformReport r;
  r.d = field(j, "d").get<Eigen::Index>();
  r.trials = field(j, "trials").get<Eigen::Index>();
  r.samples = field(j, "samples").get<Eigen::Index>();
  r.bound = field(j, "bound").get<double>();
  r.worst_random = mc_from_json(field(j, "worst_random"));
  r.worst_overall = mc_from_json(field(j, "worst_overall"));
  for (const Json& p : field(j, "probes")) {
    r.probes.push_back({field(p, "name").get<std::string>(), mc_from_json(field(p, "estimate"))});
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sweep table

inline const char* sweep_csv_header() {
  return "method,T,seed,gap,J_hat,J_star,M_err,A_err,B_err,Q_err,K_err,gram_min_eig,d_x_used,status";
}

inline void write_sweep_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto opt = [&](const std::optional<double>& v) { return format_double(v ? *v : nan); };
  os << sweep_csv_header() << '\n';
  for (const RunRecord& r : records) {
    const LatentErrors* e = r.errors ? &*r.errors : nullptr;
    os << to_string(r.config.method) << ',' << r.config.T << ',' << r.config.seed << ','
       << opt(r.gap) << ',' << opt(r.J_hat) << ',' << opt(r.J_star) << ','
       << format_double(e ? e->M_err : nan) << ',' << format_double(e ? e->A_err : nan) << ','
       << format_double(e ? e->B_err : nan) << ',' << format_double(e ? e->Q_err : nan) << ','
       << format_double(e ? e->K_err : nan) << ',' << format_double(r.gram_min_eig) << ','
       << r.d_x_used() << ',' << r.status << '\n';
  }
}

/// One-line human summary used by the command-line runner.
inline std::string summary_line(const RunRecord& r) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream os;
  os << "method=" << to_string(r.config.method) << " T=" << r.config.T << " seed=" << r.config.seed
     << " H=" << r.H << " d_x=" << r.d_x_used() << " gap=" << format_double(r.gap ? *r.gap : nan)
     << " M_err=" << format_double(r.errors ? r.errors->M_err : nan) << " status=" << r.status;
  return os.str();
}

}  // namespace corel
