#include "ellpos/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ellpos/estimators.hpp"
#include "ellpos/positions.hpp"
#include "ellpos/report.hpp"
#include "ellpos/sections.hpp"

namespace ellpos {

namespace {

using ojson = nlohmann::ordered_json;

enum class BodyUse { None, Full, Template };

struct ExperimentDef {
  BodyUse body_use;
  ojson default_body;  // null: a body must be supplied
  ojson params;
};

ExperimentDef definition(const std::string& name) {
  const ojson schedule = {20000, 50000, 100000};
  if (name == "moments") return {BodyUse::Full, nullptr, {{"seed", 0}, {"samples", 100000}, {"p", 1.0}}};
  if (name == "superconc-scan") {
    return {BodyUse::Template,
            {{"family", "Cube"}},
            {{"seed", 0},
             {"samples", 100000},
             {"n_list", {256, 1024, 4096}},
             {"p", 1.0},
             {"threshold_exponent", 0.125},
             {"solve_schedule", schedule}}};
  }
  if (name == "ell-solve") {
    return {BodyUse::Full,
            nullptr,
            {{"seed", 0},
             {"samples_schedule", schedule},
             {"step", 0.5},
             {"max_iters", 200},
             {"z_tolerance", 3.0},
             {"averaging_iters", 32},
             {"exploit_symmetry", false}}};
  }
  if (name == "balance") return {BodyUse::Full, nullptr, {{"seed", 0}, {"samples", 100000}}};
  if (name == "deviation") {
    return {BodyUse::Template,
            {{"family", "Cube"}},
            {{"seed", 0},
             {"samples", 100000},
             {"median_samples", 50000},
             {"n_list", {256, 4096, 65536}},
             {"eps_grid", {0.05, 0.1, 0.15, 0.2, 0.25, 0.3}},
             {"solve_schedule", schedule}}};
  }
  if (name == "sections-scan") {
    return {BodyUse::Full,
            nullptr,
            {{"seed", 0},
             {"k", 2},
             {"trials", 100},
             {"method", "net"},
             {"resolution", 0.0},
             {"starts", 64},
             {"eps", 0.25}}};
  }
  if (name == "john-counterexample") {
    return {BodyUse::Template,
            {{"family", "CylinderJohn"}},
            {{"seed", 0},
             {"n", 4096},
             {"eps", 0.25},
             {"k_rule", "auto"},
             {"k_multiplier", 0.0},
             {"k", 0},
             {"trials", 200},
             {"median_trials", 20000},
             {"solve_schedule", schedule}}};
  }
  if (name == "dvoretzky-dim") return {BodyUse::Full, nullptr, {{"seed", 0}, {"samples", 100000}}};
  if (name == "ellipse-check") {
    return {BodyUse::None,
            nullptr,
            {{"seed", 0}, {"pairs", 20}, {"grid", 200}, {"tolerance", 1e-6}, {"spots", {{0.5, 2.0}, {0.6, 2.0}}}}};
  }
  if (name == "singular-values") {
    return {BodyUse::None,
            nullptr,
            {{"seed", 0}, {"m", 400}, {"k", 100}, {"trials", 1024}, {"c_values", {1.0 / 64, 1.0 / 16, 1.0 / 4}}}};
  }
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

bool nonnegative_integer(const ojson& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

std::size_t count_param(const ojson& p, const char* key, std::size_t min_value) {
  const auto& v = p.at(key);
  if (!nonnegative_integer(v)) {
    throw std::invalid_argument(std::string("parameter '") + key + "' must be a nonnegative integer");
  }
  const auto out = v.get<std::size_t>();
  if (out < min_value) {
    throw std::invalid_argument(std::string("parameter '") + key + "' must be at least " + std::to_string(min_value));
  }
  return out;
}

std::vector<std::size_t> count_list(const ojson& p, const char* key) {
  const auto& v = p.at(key);
  if (!v.is_array() || v.empty()) throw std::invalid_argument(std::string("parameter '") + key + "' must be a nonempty list");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!nonnegative_integer(e)) throw std::invalid_argument(std::string("parameter '") + key + "' must hold nonnegative integers");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

double real_param(const ojson& p, const char* key) {
  const auto& v = p.at(key);
  if (!v.is_number()) throw std::invalid_argument(std::string("parameter '") + key + "' must be a number");
  return v.get<double>();
}

SeedSpec root_seed(const ojson& p) {
  const auto& v = p.at("seed");
  if (!nonnegative_integer(v)) throw std::invalid_argument("parameter 'seed' must be an unsigned 64-bit integer");
  return {v.get<std::uint64_t>(), 0};
}

std::string out_row(std::initializer_list<std::string> cells) {
  std::string s;
  for (const auto& c : cells) {
    if (!s.empty()) s += ',';
    s += c;
  }
  return s + "\n";
}

std::string fmt(double v) { return format_double(v); }
std::string fmt(std::size_t v) { return std::to_string(v); }

struct Positioned {
  BodySpec body;
  bool converged = false;
  std::string certificate;
};

// Pipeline step shared by the scans: solve the body into the ell-position.
Positioned ell_position(const BodySpec& body, const ojson& schedule, const SeedSpec& seed,
                        const parallel::Execution& exec) {
  EllSolveOptions opts;
  opts.samples_schedule = schedule.get<std::vector<std::size_t>>();
  opts.seed = seed;
  opts.exploit_symmetry = true;
  opts.exec = exec;
  const auto res = solve_ell_position(body, opts);
  return {res.body(body), res.converged, res.certificate == EllCertificate::Symmetry ? "symmetry" : "statistical"};
}

ojson estimate_json(const McEstimate& e) {
  return {{"value", e.value}, {"std_error", e.std_error}, {"n_samples", e.n_samples}};
}

ojson interval_json(const Interval& i) { return {i.low, i.high}; }

void run_moments(const BodySpec& body, const ojson& p, const parallel::Execution& exec, std::ostream& csv,
                 ojson& summary) {
  const double order = real_param(p, "p");
  const auto mom = norm_moments(body, order, count_param(p, "samples", kMinSamples), root_seed(p), exec);
  const ojson params = {{"p", order}};
  McEstimate median{mom.median, std::numeric_limits<double>::quiet_NaN(), mom.mean_1.n_samples, mom.mean_1.seed};
  csv << estimator_csv_header() << "\n";
  csv << estimator_csv_row(body, "mean_p", params, mom.mean_p) << "\n";
  csv << estimator_csv_row(body, "var_p", params, mom.var_p) << "\n";
  csv << estimator_csv_row(body, "mean_1", params, mom.mean_1) << "\n";
  csv << estimator_csv_row(body, "mean_2", params, mom.mean_2) << "\n";
  csv << estimator_csv_row(body, "median", params, median) << "\n";
  summary = {{"p", order},
             {"mean_p", estimate_json(mom.mean_p)},
             {"var_p", estimate_json(mom.var_p)},
             {"median", mom.median},
             {"mean_1", estimate_json(mom.mean_1)},
             {"mean_2", estimate_json(mom.mean_2)}};
}

void run_superconc_scan(const ojson& body_template, const ojson& p, const parallel::Execution& exec,
                        std::ostream& csv, ojson& summary) {
  const auto n_list = count_list(p, "n_list");
  const double order = real_param(p, "p");
  const double exponent = real_param(p, "threshold_exponent");
  const auto samples = count_param(p, "samples", kMinSamples);
  const SeedSpec root = root_seed(p);
  csv << "family,n,converged,ratio,ratio_se,ratio_log_n,variance,variance_se,gradient_energy,gradient_energy_se,"
         "talagrand_rhs,flat_energy,spiky_energy,spiky_prob\n";
  summary = {{"rows", ojson::array()}};
  for (std::size_t j = 0; j < n_list.size(); ++j) {
    const std::size_t n = n_list[j];
    const BodySpec raw = body_for_dim(body_template, n, split_seed(root, 3 * j), 20000, exec);
    // a solver failure flags the row; the scan continues on the unsolved iterate
    const auto pos = ell_position(raw, p.at("solve_schedule"), split_seed(root, 3 * j + 1), exec);
    const auto rep = superconcentration_ratio(pos.body, order, samples, split_seed(root, 3 * j + 2), exponent, exec);
    const double log_n = std::log(static_cast<double>(n));
    csv << out_row({family_name(raw.family()), fmt(n), pos.converged ? "1" : "0", fmt(rep.ratio), fmt(rep.ratio_se),
                    fmt(rep.ratio * log_n), fmt(rep.variance.value), fmt(rep.variance.std_error),
                    fmt(rep.gradient_energy.value), fmt(rep.gradient_energy.std_error), fmt(rep.talagrand_rhs),
                    fmt(rep.flat_energy), fmt(rep.spiky_energy), fmt(rep.spiky_prob_per_coord)});
    summary["rows"].push_back(
        {{"n", n}, {"converged", pos.converged}, {"ratio", rep.ratio}, {"ratio_se", rep.ratio_se}, {"ratio_log_n", rep.ratio * log_n}});
  }
}

void run_ell_solve(const BodySpec& body, const ojson& p, const parallel::Execution& exec, std::ostream& csv,
                   ojson& summary) {
  EllSolveOptions opts;
  opts.seed = root_seed(p);
  opts.samples_schedule = p.at("samples_schedule").get<std::vector<std::size_t>>();
  opts.step = real_param(p, "step");
  opts.max_iters = count_param(p, "max_iters", 1);
  opts.z_tolerance = real_param(p, "z_tolerance");
  opts.averaging_iters = count_param(p, "averaging_iters", 0);
  opts.exploit_symmetry = p.at("exploit_symmetry").get<bool>();
  opts.exec = exec;
  for (std::size_t s : opts.samples_schedule) {
    if (s < 1000) throw std::invalid_argument("samples_schedule entries must be at least 1000");
  }
  const auto res = solve_ell_position(body, opts);
  csv << "iteration,samples,max_abs_residual,max_abs_z,ell_value,log_det,log_det_se\n";
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    const auto& t = res.trace[i];
    csv << out_row({fmt(i), fmt(t.samples), fmt(t.max_abs_residual), fmt(t.max_abs_z), fmt(t.ell_value),
                    fmt(t.log_det), fmt(t.log_det_se)});
  }
  summary = to_json(res);
  summary["body"] = to_json(res.body(body));
}

void run_balance(const BodySpec& body, const ojson& p, const parallel::Execution& exec, std::ostream& csv,
                 ojson& summary) {
  const auto res = balance_residuals(body, count_param(p, "samples", 1000), root_seed(p), exec);
  csv << "coordinate,residual,std_error,z\n";
  for (std::size_t i = 0; i < res.residuals.size(); ++i) {
    const double se = res.std_errors[i];
    csv << out_row({fmt(i), fmt(res.residuals[i]), fmt(se), fmt(se > 0.0 ? res.residuals[i] / se : 0.0)});
  }
  summary = {{"ell_squared", estimate_json(res.ell_squared)},
             {"max_abs_residual", res.max_abs_residual()},
             {"max_abs_z", res.max_abs_z()}};
}

void run_deviation(const ojson& body_template, const ojson& p, const parallel::Execution& exec, std::ostream& csv,
                   ojson& summary) {
  const auto n_list = count_list(p, "n_list");
  const auto eps = p.at("eps_grid").get<std::vector<double>>();
  const auto samples = count_param(p, "samples", 10000);
  const auto median_samples = count_param(p, "median_samples", kMinSamples);
  const SeedSpec root = root_seed(p);
  csv << "n,eps,eps_log_n,median,count,n_samples,p_hat,wilson_low,wilson_high\n";
  std::vector<double> xs, ys;
  std::size_t zero_cells = 0;
  ojson per_n = ojson::array();
  for (std::size_t j = 0; j < n_list.size(); ++j) {
    const std::size_t n = n_list[j];
    const BodySpec raw = body_for_dim(body_template, n, split_seed(root, 3 * j), 20000, exec);
    const auto pos = ell_position(raw, p.at("solve_schedule"), split_seed(root, 3 * j + 1), exec);
    const auto curve = deviation_curve(pos.body, eps, samples, split_seed(root, 3 * j + 2), median_samples, exec);
    const double log_n = std::log(static_cast<double>(n));
    for (std::size_t e = 0; e < eps.size(); ++e) {
      csv << out_row({fmt(n), fmt(eps[e]), fmt(eps[e] * log_n), fmt(curve.median), fmt(curve.counts[e]),
                      fmt(curve.n_samples), fmt(curve.probs[e]), fmt(curve.wilson_low[e]), fmt(curve.wilson_high[e])});
      if (curve.counts[e] > 0) {
        xs.push_back(eps[e] * log_n);
        ys.push_back(std::log(curve.probs[e]));
      } else {
        ++zero_cells;
      }
    }
    per_n.push_back({{"n", n}, {"converged", pos.converged}, {"median", curve.median}, {"probs", curve.probs}});
  }
  summary = {{"per_n", per_n}, {"cells_fitted", xs.size()}, {"cells_zero", zero_cells}};
  if (xs.size() >= 2) {
    const auto fit = least_squares(xs, ys);
    summary["slope"] = fit.slope;
    summary["intercept"] = fit.intercept;
    summary["r_squared"] = fit.r_squared;
  }
}

SphericityMethod method_for(std::size_t k) {
  return k <= 3 ? SphericityMethod::net_default() : SphericityMethod::multistart();
}

void run_sections_scan(const BodySpec& body, const ojson& p, const parallel::Execution& exec, std::ostream& csv,
                       ojson& summary) {
  const auto k = count_param(p, "k", 1);
  const auto trials = count_param(p, "trials", 1);
  const double eps = real_param(p, "eps");
  const std::string kind = p.at("method").get<std::string>();
  if (k > body.dim()) throw std::invalid_argument("k must not exceed the body dimension");
  SphericityMethod method;
  if (kind == "net") {
    if (k > 3) throw std::invalid_argument("the net method supports k <= 3");
    method.net.resolution = real_param(p, "resolution");
  } else if (kind == "multistart") {
    method = SphericityMethod::multistart(count_param(p, "starts", 1));
  } else {
    throw std::invalid_argument("method must be 'net' or 'multistart'");
  }
  const SeedSpec root = root_seed(p);
  csv << "trial," << sphericity_csv_header() << ",ratio_lower\n";
  std::size_t within = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto basis = haar_subspace(split_seed(split_seed(root, 0), t), body.dim(), k);
    const auto rep = sphericity_ratio(body, basis, method, split_seed(split_seed(root, 1), t), exec);
    if (rep.ratio <= 1.0 + eps) ++within;
    csv << t << "," << sphericity_csv_row(rep) << "," << fmt(rep.ratio_lower) << "\n";
  }
  const auto band = wilson_interval(within, trials);
  summary = {{"k", k},
             {"trials", trials},
             {"eps", eps},
             {"within", within},
             {"fraction_within", static_cast<double>(within) / static_cast<double>(trials)},
             {"wilson", interval_json(band)}};
}

void run_john_counterexample(const ojson& body_template, const ojson& p, const parallel::Execution& exec,
                             std::ostream& csv, ojson& summary) {
  const auto n = count_param(p, "n", 512);
  const double eps = real_param(p, "eps");
  if (!(eps > 0.0 && eps <= 0.5)) throw std::invalid_argument("eps must lie in (0, 0.5]");
  const auto trials = count_param(p, "trials", 1);
  const bool cylinder = body_template.value("family", "") == "CylinderJohn";
  std::string rule = p.at("k_rule").get<std::string>();
  if (rule == "auto") rule = cylinder ? "eps2" : "eps_over_log";
  double mult = real_param(p, "k_multiplier");
  if (mult == 0.0) mult = rule == "eps2" ? 2.0 : 0.5;
  if (!(mult > 0.0)) throw std::invalid_argument("k_multiplier must be positive");
  const double log_n = std::log(static_cast<double>(n));
  std::size_t k = count_param(p, "k", 0);
  if (k == 0) {
    if (rule == "eps2") {
      k = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(mult * eps * eps * log_n)));
    } else if (rule == "eps_over_log") {
      k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(mult * eps * log_n / std::log(1.0 / eps))));
    } else {
      throw std::invalid_argument("k_rule must be 'auto', 'eps2' or 'eps_over_log'");
    }
  }
  if (k > n) throw std::invalid_argument("k must not exceed n");

  const SeedSpec root = root_seed(p);
  const BodySpec raw = body_for_dim(body_template, n, split_seed(root, 0), count_param(p, "median_trials", 1), exec);
  bool converged = true;
  BodySpec body = raw;
  if (!cylinder) {
    const auto pos = ell_position(raw, p.at("solve_schedule"), split_seed(root, 1), exec);
    body = pos.body;
    converged = pos.converged;
  }
  const auto method = method_for(k);
  csv << "trial,seed_master,seed_stream,k,method,r_min,r_max,ratio,ratio_lower,certified,exceeds\n";
  std::size_t exceeds = 0, within = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto basis = haar_subspace(split_seed(split_seed(root, 2), t), n, k);
    const SeedSpec s = split_seed(split_seed(root, 3), t);
    const auto rep = sphericity_ratio(body, basis, method, s, exec);
    // ratio_lower is attained by actual section points, so exceeding it is a fact, not an estimate
    const bool ex = rep.ratio_lower > 1.0 + eps;
    if (ex) ++exceeds;
    if (rep.ratio <= 1.0 + eps) ++within;
    char method_name[32];
    std::snprintf(method_name, sizeof method_name, "%s", rep.method.kind == SphericityMethod::Kind::Net ? "net" : "multistart");
    csv << out_row({fmt(t), std::to_string(s.master), std::to_string(s.stream), fmt(k), method_name, fmt(rep.r_min),
                    fmt(rep.r_max), fmt(rep.ratio), fmt(rep.ratio_lower), rep.certified ? "1" : "0", ex ? "1" : "0"});
  }
  const double tr = static_cast<double>(trials);
  summary = {{"n", n},
             {"eps", eps},
             {"k", k},
             {"k_rule", rule},
             {"k_multiplier", mult},
             {"body", to_json(body)},
             {"body_converged", converged},
             {"method", method.kind == SphericityMethod::Kind::Net ? "net" : "multistart"},
             {"trials", trials},
             {"failures", exceeds},
             {"failure_fraction", static_cast<double>(exceeds) / tr},
             {"failure_wilson", interval_json(wilson_interval(exceeds, trials))},
             {"successes", within},
             {"success_fraction", static_cast<double>(within) / tr},
             {"success_wilson", interval_json(wilson_interval(within, trials))}};
  if (body.family() == Family::CylinderJohn) summary["m"] = body.m();
}

void run_dvoretzky(const BodySpec& body, const ojson& p, const parallel::Execution& exec, std::ostream& csv,
                   ojson& summary) {
  const auto est = dvoretzky_dimension(body, count_param(p, "samples", kMinSamples), root_seed(p), exec);
  csv << estimator_csv_header() << "\n" << estimator_csv_row(body, "dvoretzky_dimension", ojson::object(), est) << "\n";
  summary = {{"k", estimate_json(est)}, {"lipschitz", lipschitz_constant(body)}};
}

void run_ellipse_check(const ojson& p, std::ostream& csv, ojson& summary) {
  const auto pairs = count_param(p, "pairs", 0);
  const auto grid = count_param(p, "grid", 100);
  const double tol = real_param(p, "tolerance");
  std::vector<std::pair<std::string, std::pair<double, double>>> cases;
  for (const auto& s : p.at("spots")) cases.push_back({"spot", s.get<std::pair<double, double>>()});
  GaussianStream rng(split_seed(root_seed(p), 0));
  for (std::size_t i = 0; i < pairs; ++i) {
    const double a = 0.05 + 0.9 * rng.uniform();
    const double b = 1.05 + 3.95 * rng.uniform();
    cases.push_back({"random", {a, b}});
  }
  csv << "kind,a,b,closed_form,bruteforce,lower_bound_holds\n";
  bool all = true;
  double worst = -std::numeric_limits<double>::infinity();
  ojson spots = ojson::array();
  for (const auto& [kind, ab] : cases) {
    const double closed = ellipse_intersection_distance(ab.first, ab.second);
    const double brute = bm_distance_2d_bruteforce(ab.first, ab.second, grid);
    const bool holds = closed <= brute + tol;
    all = all && holds;
    worst = std::max(worst, closed - brute);
    if (kind == "spot") spots.push_back({{"a", ab.first}, {"b", ab.second}, {"closed_form", closed}, {"bruteforce", brute}});
    csv << out_row({kind, fmt(ab.first), fmt(ab.second), fmt(closed), fmt(brute), holds ? "1" : "0"});
  }
  summary = {{"all_hold", all}, {"max_closed_minus_brute", worst}, {"spots", spots}};
}

void run_singular_values(const ojson& p, const parallel::Execution& exec, std::ostream& csv, ojson& summary) {
  const auto rep = gaussian_extremes_experiment(count_param(p, "m", 1), count_param(p, "k", 1),
                                                count_param(p, "trials", 256), root_seed(p),
                                                p.at("c_values").get<std::vector<double>>(), exec);
  csv << "c,smax_threshold,p_smax_below,smax_low,smax_high,smin_threshold,p_smin_above,smin_low,smin_high\n";
  ojson rows = ojson::array();
  for (const auto& r : rep.rows) {
    csv << out_row({fmt(r.c), fmt(r.smax_threshold), fmt(r.p_smax_below), fmt(r.smax_band.low), fmt(r.smax_band.high),
                    fmt(r.smin_threshold), fmt(r.p_smin_above), fmt(r.smin_band.low), fmt(r.smin_band.high)});
    rows.push_back({{"c", r.c},
                    {"p_smax_below", r.p_smax_below},
                    {"smax_wilson", interval_json(r.smax_band)},
                    {"p_smin_above", r.p_smin_above},
                    {"smin_wilson", interval_json(r.smin_band)}});
  }
  summary = {{"m", rep.m}, {"k", rep.k}, {"trials", rep.trials}, {"mean_smax", rep.mean_smax}, {"mean_smin", rep.mean_smin},
             {"rows", rows}};
}

}  // namespace

nlohmann::ordered_json to_json(const ExperimentManifest& m) {
  return {{"experiment", m.experiment}, {"body", m.body}, {"params", m.params}, {"output_path", m.output_path}};
}

ExperimentManifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("manifest must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "experiment" && key != "body" && key != "params" && key != "output_path") {
      throw std::invalid_argument("unknown manifest field '" + key + "'");
    }
  }
  ExperimentManifest m;
  if (!j.contains("experiment") || !j.at("experiment").is_string()) throw std::invalid_argument("manifest needs 'experiment'");
  m.experiment = j.at("experiment").get<std::string>();
  definition(m.experiment);
  if (j.contains("body")) m.body = ojson::parse(j.at("body").dump());
  if (j.contains("params")) {
    if (!j.at("params").is_object()) throw std::invalid_argument("'params' must be an object");
    m.params = ojson::parse(j.at("params").dump());
  }
  if (j.contains("output_path")) m.output_path = j.at("output_path").get<std::string>();
  return m;
}

ExperimentManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read manifest '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (text.rfind("#", 0) == 0) {
    return manifest_from_json(nlohmann::json::parse(parse_manifest_comment(text.substr(0, text.find('\n'))).dump()));
  }
  try {
    return manifest_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("manifest is not valid JSON: ") + e.what());
  }
}

ExperimentManifest resolve_defaults(ExperimentManifest m) {
  const ExperimentDef def = definition(m.experiment);
  for (const auto& [key, value] : m.params.items()) {
    if (!def.params.contains(key)) throw std::invalid_argument("unknown parameter '" + key + "' for " + m.experiment);
  }
  ojson params = ojson::object();
  for (const auto& [key, value] : def.params.items()) params[key] = m.params.contains(key) ? m.params.at(key) : value;
  m.params = std::move(params);
  switch (def.body_use) {
    case BodyUse::None:
      if (!m.body.is_null()) throw std::invalid_argument(m.experiment + " takes no body");
      break;
    case BodyUse::Full:
      if (m.body.is_null()) throw std::invalid_argument(m.experiment + " needs a body");
      m.body = to_json(body_from_json(nlohmann::json::parse(m.body.dump())));
      break;
    case BodyUse::Template:
      if (m.body.is_null()) m.body = def.default_body;
      if (!m.body.is_object() || !m.body.contains("family")) throw std::invalid_argument("body template needs a family");
      family_from_name(m.body.at("family").get<std::string>());
      break;
  }
  return m;
}

BodySpec body_for_dim(const nlohmann::ordered_json& body_template, std::size_t n, const SeedSpec& seed,
                      std::size_t cylinder_trials, const parallel::Execution& exec) {
  nlohmann::json j = nlohmann::json::parse(body_template.dump());
  if (j.contains("dim") && j.at("dim").get<std::size_t>() != n) {
    throw std::invalid_argument("body template dimension does not match n");
  }
  j["dim"] = n;
  if (family_from_name(j.at("family").get<std::string>()) == Family::CylinderJohn && !j.contains("m")) {
    CylinderOptions opts;
    opts.trials = cylinder_trials;
    BodySpec body = make_cylinder_john_body(n, seed, opts, exec);
    if (j.contains("diag")) body = body.with_diag(j.at("diag").get<std::vector<double>>());
    return body;
  }
  return body_from_json(j);
}

ExperimentOutput run_experiment(const ExperimentManifest& manifest, const parallel::Execution& exec) {
  ExperimentOutput out;
  out.manifest = resolve_defaults(manifest);
  const auto& m = out.manifest;
  const auto& p = m.params;
  std::ostringstream csv;
  csv << manifest_comment(to_json(m)) << "\n";
  const auto full_body = [&] { return body_from_json(nlohmann::json::parse(m.body.dump())); };
  const std::string& e = m.experiment;
  if (e == "moments") run_moments(full_body(), p, exec, csv, out.summary);
  if (e == "superconc-scan") run_superconc_scan(m.body, p, exec, csv, out.summary);
  if (e == "ell-solve") run_ell_solve(full_body(), p, exec, csv, out.summary);
  if (e == "balance") run_balance(full_body(), p, exec, csv, out.summary);
  if (e == "deviation") run_deviation(m.body, p, exec, csv, out.summary);
  if (e == "sections-scan") run_sections_scan(full_body(), p, exec, csv, out.summary);
  if (e == "john-counterexample") run_john_counterexample(m.body, p, exec, csv, out.summary);
  if (e == "dvoretzky-dim") run_dvoretzky(full_body(), p, exec, csv, out.summary);
  if (e == "ellipse-check") run_ellipse_check(p, csv, out.summary);
  if (e == "singular-values") run_singular_values(p, exec, csv, out.summary);
  out.csv = csv.str();
  return out;
}

}  // namespace ellpos
