#include "ellpos/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numbers>

#include "ellpos/bodies.hpp"
#include "ellpos/estimators.hpp"
#include "ellpos/experiments.hpp"
#include "ellpos/positions.hpp"
#include "ellpos/report.hpp"
#include "ellpos/sections.hpp"

namespace ellpos {

namespace {

using ojson = nlohmann::ordered_json;

struct Context {
  SeedSpec root;
  parallel::Execution exec;
  double tol = 1.0;     // tolerance scale
  double budget = 1.0;  // sample budget scale

  std::size_t samples(double nominal, std::size_t floor = 1000) const {
    return std::max(floor, static_cast<std::size_t>(std::llround(nominal * budget)));
  }
  SeedSpec seed(std::uint64_t criterion, std::uint64_t part) const { return split_seed(split_seed(root, criterion), part); }
};

std::string verdict(bool ok) { return ok ? "ok" : "FAIL"; }

double chi_mean(double n) { return std::sqrt(2.0) * std::exp(std::lgamma((n + 1.0) / 2.0) - std::lgamma(n / 2.0)); }

ExperimentOutput run_manifest(const std::string& experiment, ojson body, ojson params, const Context& cx) {
  ExperimentManifest m;
  m.experiment = experiment;
  m.body = std::move(body);
  m.params = std::move(params);
  return run_experiment(m, cx.exec);
}

CriterionResult check_a1(const Context& cx) {
  CriterionResult r{"A1", "oracle identities", false, "", ojson::object()};
  const double l1_target = 1.0 - 2.0 / std::numbers::pi;
  const auto sc = superconcentration_ratio(BodySpec::lp_ball(400, 1.0), 1.0, cx.samples(1e6), cx.seed(1, 0), 0.125, cx.exec);
  const bool ok_l1 = std::abs(sc.ratio - l1_target) <= 0.01 * cx.tol;

  EllSolveOptions opts;
  opts.seed = cx.seed(1, 1);
  opts.exec = cx.exec;
  for (auto& s : opts.samples_schedule) s = cx.samples(static_cast<double>(s));
  const auto pos = solve_ell_position(BodySpec::cube(2), opts);
  const double scale_target = std::sqrt(1.0 + 2.0 / std::numbers::pi);
  double worst_rel = 0.0;
  for (double d : pos.diag) worst_rel = std::max(worst_rel, std::abs(d / scale_target - 1.0));
  const bool ok_cube = pos.converged && worst_rel <= 0.005 * cx.tol;

  const auto kb = dvoretzky_dimension(BodySpec::euclidean(100), cx.samples(1e5), cx.seed(1, 2), cx.exec);
  const double k_target = std::pow(chi_mean(100.0), 2);
  const bool ok_k = std::abs(kb.value - k_target) <= 1.0 * cx.tol;

  r.passed = ok_l1 && ok_cube && ok_k;
  r.details = {{"l1_ratio", sc.ratio},
               {"l1_ratio_se", sc.ratio_se},
               {"l1_target", l1_target},
               {"cube2_diag", pos.diag},
               {"cube2_converged", pos.converged},
               {"cube2_target", scale_target},
               {"cube2_max_rel_error", worst_rel},
               {"euclid_k", kb.value},
               {"euclid_k_se", kb.std_error},
               {"euclid_k_target", k_target}};
  char buf[256];
  std::snprintf(buf, sizeof buf, "l1 ratio %.5f vs %.5f (%s); cube scale rel err %.2e (%s); k(B) %.3f vs %.3f (%s)",
                sc.ratio, l1_target, verdict(ok_l1).c_str(), worst_rel, verdict(ok_cube).c_str(), kb.value, k_target,
                verdict(ok_k).c_str());
  r.summary = buf;
  return r;
}

CriterionResult check_a2(const Context& cx) {
  CriterionResult r{"A2", "superconcentration trend", false, "", ojson::object()};
  const ojson params = {{"seed", cx.root.master + 2},
                        {"samples", cx.samples(1e6)},
                        {"n_list", {256, 1024, 4096, 16384}},
                        {"p", 1.0}};
  const auto out = run_manifest("superconc-scan", {{"family", "Cube"}}, params, cx);
  std::vector<double> ratio, scaled;
  bool converged = true;
  for (const auto& row : out.summary.at("rows")) {
    ratio.push_back(row.at("ratio").get<double>());
    scaled.push_back(row.at("ratio_log_n").get<double>());
    converged = converged && row.at("converged").get<bool>();
  }
  const double shrink = ratio.back() / ratio.front();
  const double spread = *std::max_element(scaled.begin(), scaled.end()) / *std::min_element(scaled.begin(), scaled.end());
  const bool ok_shrink = shrink <= 0.55;
  const bool ok_spread = spread <= 2.0;
  r.passed = ok_shrink && ok_spread && converged;
  r.details = {{"rows", out.summary.at("rows")}, {"ratio_shrink", shrink}, {"ratio_log_n_spread", spread}};
  char buf[256];
  std::snprintf(buf, sizeof buf, "ratio(2^14)/ratio(2^8) = %.4f <= 0.55 (%s); ratio*log n spread %.3f <= 2 (%s)", shrink,
                verdict(ok_shrink).c_str(), spread, verdict(ok_spread).c_str());
  r.summary = buf;
  return r;
}

CriterionResult check_a3(const Context& cx) {
  CriterionResult r{"A3", "balancing", false, "", ojson::object()};
  constexpr std::size_t n = 64;
  GaussianStream wrng(cx.seed(3, 100));
  std::vector<double> weights(n);
  for (double& w : weights) w = 0.5 + 1.5 * wrng.uniform();
  const std::vector<std::pair<std::string, BodySpec>> suite{{"Cube", BodySpec::cube(n)},
                                                            {"LpBall(1)", BodySpec::lp_ball(n, 1.0)},
                                                            {"LpBall(3)", BodySpec::lp_ball(n, 3.0)},
                                                            {"WeightedLp(2)", BodySpec::weighted_lp(n, 2.0, weights)}};
  bool ok_all = true;
  ojson rows = ojson::array();
  std::string summary;
  for (std::size_t b = 0; b < suite.size(); ++b) {
    EllSolveOptions opts;
    opts.seed = cx.seed(3, 2 * b);
    opts.exec = cx.exec;
    for (auto& s : opts.samples_schedule) s = cx.samples(static_cast<double>(s));
    const auto res = solve_ell_position(suite[b].second, opts);
    const std::size_t validation = 4 * opts.samples_schedule.back();
    const auto check = balance_residuals(res.body(suite[b].second), validation, cx.seed(3, 2 * b + 1), cx.exec);
    const bool ok = check.max_abs_z() <= 3.0 * cx.tol;
    ok_all = ok_all && ok;
    rows.push_back({{"body", suite[b].first},
                    {"converged", res.converged},
                    {"iterations", res.iterations},
                    {"validation_samples", validation},
                    {"max_abs_z", check.max_abs_z()},
                    {"max_abs_residual", check.max_abs_residual()},
                    {"diag", res.diag}});
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s%s max|z| %.2f (%s)", summary.empty() ? "" : "; ", suite[b].first.c_str(),
                  check.max_abs_z(), verdict(ok).c_str());
    summary += buf;
  }
  std::vector<double> d(n, 1.0);
  d[0] = 2.0;
  const auto control = balance_residuals(BodySpec::cube(n).with_diag(d), cx.samples(1e6), cx.seed(3, 99), cx.exec);
  const double z1 = std::abs(control.residuals[0]) / control.std_errors[0];
  const bool ok_control = z1 > 5.0 / cx.tol;
  r.passed = ok_all && ok_control;
  r.details = {{"bodies", rows}, {"control_r1", control.residuals[0]}, {"control_r1_se", control.std_errors[0]}, {"control_z", z1}};
  char buf[96];
  std::snprintf(buf, sizeof buf, "; control |r1|/se %.1f > 5 (%s)", z1, verdict(ok_control).c_str());
  r.summary = summary + buf;
  return r;
}

CriterionResult check_a4(const Context& cx) {
  CriterionResult r{"A4", "dichotomy", false, "", ojson::object()};
  const ojson cyl_params = {
      {"seed", cx.root.master + 4}, {"n", 4096}, {"eps", 0.25}, {"k_rule", "eps2"}, {"k_multiplier", 2.0}, {"trials", 200}};
  const auto cyl = run_manifest("john-counterexample", {{"family", "CylinderJohn"}}, cyl_params, cx);
  const ojson cube_params = {{"seed", cx.root.master + 40},
                       {"n", 4096},
                       {"eps", 0.25},
                       {"k_rule", "eps_over_log"},
                       {"k_multiplier", 0.5},
                       {"trials", 200},
                       {"solve_schedule", {cx.samples(2e4), cx.samples(5e4), cx.samples(1e5)}}};
  const auto cube = run_manifest("john-counterexample", {{"family", "Cube"}}, cube_params, cx);
  const double fail_low = cyl.summary.at("failure_wilson")[0].get<double>();
  const double succ_low = cube.summary.at("success_wilson")[0].get<double>();
  const bool ok_cyl = fail_low >= 0.40;
  const bool ok_cube = succ_low >= 0.90;
  r.passed = ok_cyl && ok_cube;
  r.details = {{"cylinder", cyl.summary}, {"cube", cube.summary}};
  r.details["cylinder"].erase("body");
  r.details["cube"].erase("body");
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "cylinder k=%zu m=%zu failing %.3f, Wilson low %.3f >= 0.40 (%s); cube k=%zu within %.3f, Wilson low %.3f >= 0.90 (%s)",
                cyl.summary.at("k").get<std::size_t>(), cyl.summary.at("m").get<std::size_t>(),
                cyl.summary.at("failure_fraction").get<double>(), fail_low, verdict(ok_cyl).c_str(),
                cube.summary.at("k").get<std::size_t>(), cube.summary.at("success_fraction").get<double>(), succ_low,
                verdict(ok_cube).c_str());
  r.summary = buf;
  return r;
}

CriterionResult check_a5(const Context& cx) {
  CriterionResult r{"A5", "deviation bound shape", false, "", ojson::object()};
  const std::size_t samples = cx.samples(1e5, 10000);
  const ojson params = {{"seed", cx.root.master + 5},
                        {"samples", samples},
                        {"median_samples", cx.samples(5e4)},
                        {"n_list", {256, 4096, 65536}},
                        {"eps_grid", {0.05, 0.1, 0.15, 0.2, 0.25, 0.3}}};
  const auto out = run_manifest("deviation", {{"family", "Cube"}}, params, cx);
  const auto& s = out.summary;
  const bool have_fit = s.contains("slope");
  const double slope = have_fit ? s.at("slope").get<double>() : 0.0;
  const double r2 = have_fit ? s.at("r_squared").get<double>() : 0.0;
  const bool ok_fit = have_fit && slope < 0.0 && r2 >= 1.0 - 0.2 * cx.tol;
  // P at eps = 0.15 (third grid entry) across n
  std::vector<double> p15;
  for (const auto& row : s.at("per_n")) p15.push_back(row.at("probs")[2].get<double>());
  bool ok_mono = true;
  ojson seps = ojson::array();
  for (std::size_t i = 0; i + 1 < p15.size(); ++i) {
    const double n = static_cast<double>(samples);
    const double se = std::sqrt(p15[i] * (1 - p15[i]) / n + p15[i + 1] * (1 - p15[i + 1]) / n);
    const double z = se > 0.0 ? (p15[i] - p15[i + 1]) / se : 0.0;
    seps.push_back(z);
    ok_mono = ok_mono && z > 3.0 * cx.tol;
  }
  r.passed = ok_fit && ok_mono;
  r.details = {{"summary", s}, {"p_eps_0.15", p15}, {"separation_z", seps}};
  char buf[256];
  std::snprintf(buf, sizeof buf, "slope %.4f < 0, R^2 %.4f >= 0.8 (%s); P(eps=0.15) = %.4g, %.4g, %.4g decreasing by > 3 SE (%s)",
                slope, r2, verdict(ok_fit).c_str(), p15[0], p15[1], p15[2], verdict(ok_mono).c_str());
  r.summary = buf;
  return r;
}

CriterionResult check_a6(const Context& cx) {
  CriterionResult r{"A6", "disk-ellipse distance", false, "", ojson::object()};
  const double tol = 1e-6 * cx.tol;
  const ojson params = {{"seed", cx.root.master + 6}, {"pairs", 20}, {"grid", 200}, {"tolerance", tol}};
  const auto out = run_manifest("ellipse-check", nullptr, params, cx);
  const bool ok_bound = out.summary.at("all_hold").get<bool>();
  // exact values of the closed form: 1 + 2.25/3.75 = 8/5 and 1 + 1.92/3.64 = 139/91
  const double spot1 = ellipse_intersection_distance(0.5, 2.0);
  const double spot2 = ellipse_intersection_distance(0.6, 2.0);
  const double ref1 = std::sqrt(8.0 / 5.0);
  const double ref2 = std::sqrt(139.0 / 91.0);
  const bool ok_spots = std::abs(spot1 - ref1) <= tol && std::abs(spot2 - ref2) <= tol;
  r.passed = ok_bound && ok_spots;
  r.details = {{"check", out.summary}, {"spot_0.5_2", spot1}, {"spot_0.6_2", spot2}};
  char buf[256];
  std::snprintf(buf, sizeof buf, "closed form <= brute force on 20 pairs (%s, worst gap %.3g); spots %.7f, %.7f (%s)",
                verdict(ok_bound).c_str(), out.summary.at("max_closed_minus_brute").get<double>(), spot1, spot2,
                verdict(ok_spots).c_str());
  r.summary = buf;
  return r;
}

bool away_from_ties(const BodySpec& body, std::span<const double> x) {
  const auto a = body.inv_scale();
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) v[i] = std::abs(a[i] * x[i]);
  if (*std::min_element(v.begin(), v.end()) <= 1e-3) return false;
  if (body.family() == Family::CylinderJohn) {
    const std::size_t head = body.dim() - body.m();
    double hmax = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < head; ++i) hmax = std::max(hmax, v[i]);
    for (std::size_t i = head; i < v.size(); ++i) tail += v[i] * v[i];
    if (std::abs(hmax - std::sqrt(tail)) <= 1e-3) return false;
    v.resize(head);
  }
  std::sort(v.begin(), v.end());
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] - v[i - 1] <= 1e-3) return false;
  }
  return true;
}

CriterionResult check_a7(const Context& cx) {
  CriterionResult r{"A7", "gradient inequalities", false, "", ojson::object()};
  constexpr std::size_t n = 32;
  GaussianStream wrng(cx.seed(7, 100));
  std::vector<double> weights(n);
  for (double& w : weights) w = 0.5 + 1.5 * wrng.uniform();
  const std::vector<std::pair<std::string, BodySpec>> suite{{"Cube", BodySpec::cube(n)},
                                                            {"LpBall(1)", BodySpec::lp_ball(n, 1.0)},
                                                            {"LpBall(3)", BodySpec::lp_ball(n, 3.0)},
                                                            {"Euclidean", BodySpec::euclidean(n)},
                                                            {"WeightedLp(2)", BodySpec::weighted_lp(n, 2.0, weights)},
                                                            {"CylinderJohn(4)", BodySpec::cylinder_john(n, 4)}};
  double worst_identity = 0.0, worst_fd = 0.0, worst_l1 = std::numeric_limits<double>::infinity(), worst_poincare = -1.0;
  bool ok_identity = true, ok_fd = true, ok_l1 = true, ok_poincare = true;
  ojson rows = ojson::array();
  for (std::size_t b = 0; b < suite.size(); ++b) {
    const auto& body = suite[b].second;
    GaussianStream rng(cx.seed(7, 10 * b));
    std::vector<double> x(n), g(n), xp(n);
    for (int t = 0; t < 200; ++t) {
      rng.fill(x);
      const double v = evaluate(body, x, g);
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += g[i] * x[i];
      const double rel = std::abs(dot - v) / v;
      worst_identity = std::max(worst_identity, rel);
      ok_identity = ok_identity && rel <= 1e-12 * cx.tol;
    }
    constexpr double h = 1e-6;
    for (int accepted = 0; accepted < 50;) {
      rng.fill(x);
      if (!away_from_ties(body, x)) continue;
      ++accepted;
      evaluate(body, x, g);
      double err = 0.0, gmax = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        xp = x;
        xp[i] = x[i] + h;
        const double up = evaluate_value(body, xp);
        xp[i] = x[i] - h;
        const double down = evaluate_value(body, xp);
        err = std::max(err, std::abs((up - down) / (2 * h) - g[i]));
        gmax = std::max(gmax, std::abs(g[i]));
      }
      worst_fd = std::max(worst_fd, err / gmax);
      ok_fd = ok_fd && err <= 1e-5 * cx.tol * gmax;
    }
    ojson row = {{"body", suite[b].first}};
    for (double p : {1.0, 2.0}) {
      const auto l1 = l1_gradient_check(body, p, cx.samples(1e5), cx.seed(7, 10 * b + static_cast<std::uint64_t>(p)), cx.exec);
      const double margin = l1.raw_margin + 3.0 * cx.tol * l1.std_error;
      ok_l1 = ok_l1 && margin >= 0.0;
      worst_l1 = std::min(worst_l1, margin / std::max(l1.rhs, 1e-300));
      const auto sc = superconcentration_ratio(body, p, cx.samples(1e5), cx.seed(7, 10 * b + 2 + static_cast<std::uint64_t>(p)),
                                               0.125, cx.exec);
      const double excess = sc.ratio - 1.0 - 3.0 * cx.tol * sc.ratio_se;
      ok_poincare = ok_poincare && excess <= 0.0;
      worst_poincare = std::max(worst_poincare, sc.ratio);
      const std::string tag = p == 1.0 ? "p1" : "p2";
      row["l1_lhs_" + tag] = l1.lhs;
      row["l1_rhs_" + tag] = l1.rhs;
      row["l1_margin_" + tag] = margin;
      row["poincare_ratio_" + tag] = sc.ratio;
      row["poincare_ratio_se_" + tag] = sc.ratio_se;
    }
    rows.push_back(row);
  }
  r.passed = ok_identity && ok_fd && ok_l1 && ok_poincare;
  r.details = {{"bodies", rows},
               {"max_identity_rel_error", worst_identity},
               {"max_fd_rel_error", worst_fd},
               {"min_l1_relative_margin", worst_l1},
               {"max_poincare_ratio", worst_poincare}};
  char buf[256];
  std::snprintf(buf, sizeof buf, "identity %.1e (%s); finite differences %.1e (%s); l1 margin >= 0 (%s); Poincare max %.3f (%s)",
                worst_identity, verdict(ok_identity).c_str(), worst_fd, verdict(ok_fd).c_str(), verdict(ok_l1).c_str(),
                worst_poincare, verdict(ok_poincare).c_str());
  r.summary = buf;
  return r;
}

CriterionResult check_a8(const Context& cx) {
  CriterionResult r{"A8", "Gaussian extreme singular values", false, "", ojson::object()};
  const ojson params = {{"seed", cx.root.master + 8}, {"m", 400}, {"k", 100}, {"trials", 1024}, {"c_values", {1.0 / 64}}};
  const auto out = run_manifest("singular-values", nullptr, params, cx);
  const auto& row = out.summary.at("rows")[0];
  const double pmax = row.at("p_smax_below").get<double>();
  const double pmin = row.at("p_smin_above").get<double>();
  // p - tol * (p - wilson_low) <= 1/16, i.e. the bound lies inside or above the band
  const double lmax = pmax - cx.tol * (pmax - row.at("smax_wilson")[0].get<double>());
  const double lmin = pmin - cx.tol * (pmin - row.at("smin_wilson")[0].get<double>());
  const bool ok = lmax <= 1.0 / 16 && lmin <= 1.0 / 16;
  r.passed = ok;
  r.details = out.summary;
  char buf[256];
  std::snprintf(buf, sizeof buf, "P{smax <= sqrt m + sqrt k/64} = %.4f, P{smin >= sqrt m - sqrt k/64} = %.4f, bound 1/16 (%s)",
                pmax, pmin, verdict(ok).c_str());
  r.summary = buf;
  return r;
}

bool selected(const CheckOptions& opts, const std::string& id) {
  return opts.only.empty() || std::find(opts.only.begin(), opts.only.end(), id) != opts.only.end();
}

std::vector<CriterionResult> run_core(const CheckOptions& opts, int workers, const CriterionCallback& on_result) {
  Context cx;
  cx.root = {opts.seed, 0};
  cx.exec.workers = workers;
  cx.tol = opts.tolerance_scale;
  cx.budget = opts.budget_scale;
  using Fn = CriterionResult (*)(const Context&);
  const std::vector<std::pair<std::string, Fn>> all{{"A1", check_a1}, {"A2", check_a2}, {"A3", check_a3}, {"A4", check_a4},
                                                    {"A5", check_a5}, {"A6", check_a6}, {"A7", check_a7}, {"A8", check_a8}};
  std::vector<CriterionResult> out;
  for (const auto& [id, fn] : all) {
    if (!selected(opts, id)) continue;
    out.push_back(fn(cx));
    if (on_result) on_result(out.back());
  }
  return out;
}

ojson criteria_json(const std::vector<CriterionResult>& list) {
  ojson arr = ojson::array();
  for (const auto& c : list) {
    arr.push_back({{"id", c.id}, {"title", c.title}, {"passed", c.passed}, {"summary", c.summary}, {"details", c.details}});
  }
  return arr;
}

}  // namespace

bool CheckReport::passed() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const CriterionResult& c) { return c.passed; });
}

CheckReport run_all_checks(const CheckOptions& opts, const CriterionCallback& on_result) {
  CheckReport report;
  report.criteria = run_core(opts, opts.workers, on_result);
  if (opts.determinism && selected(opts, "A9")) {
    const int other = opts.workers == 1 ? 8 : 1;
    const auto again = run_core(opts, other, {});
    const std::string first = criteria_json(report.criteria).dump();
    const std::string second = criteria_json(again).dump();
    CriterionResult r{"A9", "determinism", first == second, "", ojson::object()};
    r.details = {{"workers", {opts.workers, other}}, {"bytes_compared", first.size()}};
    char buf[160];
    std::snprintf(buf, sizeof buf, "reports with %d and %d workers %s (%zu bytes)", opts.workers, other,
                  r.passed ? "identical" : "DIFFER", first.size());
    r.summary = buf;
    report.criteria.push_back(r);
    if (on_result) on_result(r);
  }
  return report;
}

nlohmann::ordered_json to_json(const CheckReport& report, const CheckOptions& opts, bool with_timestamp) {
  ojson j;
  j["version"] = version_string();
  j["seed"] = opts.seed;
  j["tolerance_scale"] = opts.tolerance_scale;
  j["budget_scale"] = opts.budget_scale;
  if (with_timestamp) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["generated_at"] = buf;
  }
  j["passed"] = report.passed();
  j["criteria"] = criteria_json(report.criteria);
  return j;
}

}  // namespace ellpos
