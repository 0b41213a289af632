// ellpos command line: one subcommand per experiment, plus `check`.
// Exit codes: 0 success, 1 check failure or runtime error, 2 invalid manifest or arguments.

#include <cstdint>
#include <functional>
#include <memory>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ellpos/checks.hpp"
#include "ellpos/experiments.hpp"

namespace {

using ojson = nlohmann::ordered_json;

struct Globals {
  std::uint64_t seed = 0;
  std::optional<std::size_t> samples;
  std::string out;
  int workers = 0;
  bool json = false;
  std::string manifest;
};

struct BodyFlags {
  std::string body;
  std::string family;
  std::optional<std::size_t> dim;
  std::optional<double> lp;
  std::optional<std::size_t> m;
};

// Experiment-specific flags; only those given on the command line reach the manifest.
struct ParamFlag {
  std::string key;
  CLI::Option* option = nullptr;
  std::function<ojson()> value;
};

struct Subcommand {
  std::string name;
  CLI::App* app = nullptr;
  BodyFlags body;
  std::vector<ParamFlag> params;
  std::string samples_key;  // where --samples goes; empty: not accepted
  bool samples_as_list = false;
};

template <class T>
CLI::Option* add_param(Subcommand& sc, const std::string& flag, const std::string& key, const std::string& help) {
  auto holder = std::make_shared<T>();
  CLI::Option* opt = sc.app->add_option(flag, *holder, help);
  sc.params.push_back({key, opt, [holder] { return ojson(*holder); }});
  return opt;
}

void add_body_flags(Subcommand& sc, bool template_only) {
  sc.app->add_option("--body", sc.body.body, "body JSON, or a path to a JSON file");
  sc.app->add_option("--family", sc.body.family, "Cube, LpBall, Euclidean, WeightedLp or CylinderJohn");
  if (!template_only) sc.app->add_option("--dim", sc.body.dim, "dimension n");
  sc.app->add_option("--lp", sc.body.lp, "exponent of LpBall / WeightedLp");
  sc.app->add_option("--m", sc.body.m, "Euclidean block size of CylinderJohn");
}

ojson body_json(const BodyFlags& f) {
  if (!f.body.empty()) {
    std::string text = f.body;
    if (text.find('{') == std::string::npos) {
      std::ifstream in(text);
      if (!in) throw std::invalid_argument("cannot read body file '" + text + "'");
      std::stringstream buf;
      buf << in.rdbuf();
      text = buf.str();
    }
    try {
      return ojson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::invalid_argument(std::string("body is not valid JSON: ") + e.what());
    }
  }
  if (f.family.empty()) return nullptr;
  ojson j = {{"family", f.family}};
  if (f.dim) j["dim"] = *f.dim;
  if (f.m) j["m"] = *f.m;
  if (f.lp) j["p"] = *f.lp;
  return j;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

int emit(const ellpos::ExperimentOutput& result, const Globals& g) {
  const std::string path = g.out.empty() ? result.manifest.output_path : g.out;
  if (!path.empty()) {
    write_file(path, result.csv);
    if (!result.summary.is_null()) write_file(path + ".json", result.summary.dump(2) + "\n");
  }
  if (g.json) {
    std::cout << result.summary.dump(2) << "\n";
  } else if (path.empty()) {
    std::cout << result.csv;
  }
  return 0;
}

int run_check(const Globals& g, const std::string& only, double tolerance_scale, double budget_scale, bool no_determinism) {
  ellpos::CheckOptions opts;
  opts.seed = g.seed;
  opts.workers = g.workers;
  opts.tolerance_scale = tolerance_scale;
  opts.budget_scale = budget_scale;
  opts.only = split_list(only);
  opts.determinism = !no_determinism;
  for (const auto& id : opts.only) {
    if (id.size() != 2 || id[0] != 'A' || id[1] < '1' || id[1] > '9') throw std::invalid_argument("unknown criterion '" + id + "'");
  }
  if (!(tolerance_scale > 0.0) || !(budget_scale > 0.0)) throw std::invalid_argument("scales must be positive");
  const auto report = ellpos::run_all_checks(opts, [](const ellpos::CriterionResult& c) {
    std::cerr << c.id << " " << (c.passed ? "PASS" : "FAIL") << "  " << c.summary << "\n";
  });
  const std::string text = ellpos::to_json(report, opts).dump(2) + "\n";
  if (!g.out.empty()) write_file(g.out, text);
  std::cout << text;
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ellpos: numerical lab for positions, concentration and random sections of convex bodies"};
  app.fallthrough();
  app.require_subcommand(0, 1);
  Globals g;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--samples", g.samples, "Monte Carlo sample budget");
  app.add_option("--out", g.out, "output CSV path (a summary goes to <out>.json)");
  app.add_option("--workers", g.workers, "OpenMP worker count (0: runtime default)");
  app.add_flag("--json", g.json, "print the JSON summary to stdout");
  app.add_option("--manifest", g.manifest, "replay a manifest (JSON file or a CSV written by ellpos)");

  std::vector<Subcommand> subs;
  subs.reserve(11);
  auto make = [&](const std::string& name, const std::string& help, const std::string& samples_key) -> Subcommand& {
    subs.push_back({name, app.add_subcommand(name, help), {}, {}, samples_key});
    return subs.back();
  };

  {
    auto& sc = make("moments", "norm moments E||G||^p, variance and median", "samples");
    add_body_flags(sc, false);
    add_param<double>(sc, "--p", "p", "moment order in [1, 8]");
  }
  {
    auto& sc = make("superconc-scan", "superconcentration ratio over n after solving the ell-position", "samples");
    add_body_flags(sc, true);
    add_param<std::vector<std::size_t>>(sc, "--n-list", "n_list", "dimensions")->delimiter(',');
    add_param<double>(sc, "--p", "p", "power of the norm");
    add_param<double>(sc, "--threshold-exponent", "threshold_exponent", "flat/spiky threshold exponent");
  }
  {
    auto& sc = make("ell-solve", "solve the ell-position by the damped fixed-point iteration", "samples_schedule");
    sc.samples_as_list = true;
    add_body_flags(sc, false);
    add_param<std::vector<std::size_t>>(sc, "--schedule", "samples_schedule", "samples per iteration")->delimiter(',');
    add_param<double>(sc, "--step", "step", "damping step in (0, 2]");
    add_param<std::size_t>(sc, "--max-iters", "max_iters", "iteration cap");
    add_param<double>(sc, "--z-tolerance", "z_tolerance", "stop when max |r_i|/se_i is below this");
    add_param<std::size_t>(sc, "--averaging-iters", "averaging_iters", "tail-averaged iterations");
    add_param<bool>(sc, "--exploit-symmetry", "exploit_symmetry", "uniform diagonal for permutation-invariant bodies");
  }
  {
    auto& sc = make("balance", "balancing residuals of a body", "samples");
    add_body_flags(sc, false);
  }
  {
    auto& sc = make("deviation", "deviation probabilities around the median, with a log-linear fit", "samples");
    add_body_flags(sc, true);
    add_param<std::vector<std::size_t>>(sc, "--n-list", "n_list", "dimensions")->delimiter(',');
    add_param<std::vector<double>>(sc, "--eps", "eps_grid", "relative deviation grid")->delimiter(',');
    add_param<std::size_t>(sc, "--median-samples", "median_samples", "samples for the median pass");
  }
  {
    auto& sc = make("sections-scan", "sphericity ratios of random sections", "trials");
    add_body_flags(sc, false);
    add_param<std::size_t>(sc, "--k", "k", "section dimension");
    add_param<std::size_t>(sc, "--trials", "trials", "number of subspaces");
    add_param<std::string>(sc, "--method", "method", "net or multistart");
    add_param<double>(sc, "--resolution", "resolution", "net resolution (0: default)");
    add_param<std::size_t>(sc, "--starts", "starts", "multi-start count");
    add_param<double>(sc, "--eps", "eps", "sphericity threshold");
  }
  {
    auto& sc = make("john-counterexample", "fraction of non-spherical sections of a body", "trials");
    add_body_flags(sc, true);
    add_param<std::size_t>(sc, "--n", "n", "dimension");
    add_param<double>(sc, "--eps", "eps", "epsilon in (0, 0.5]");
    add_param<std::string>(sc, "--k-rule", "k_rule", "auto, eps2 or eps_over_log");
    add_param<double>(sc, "--k-multiplier", "k_multiplier", "constant in the k rule (0: rule default)");
    add_param<std::size_t>(sc, "--k", "k", "explicit section dimension (0: from the rule)");
    add_param<std::size_t>(sc, "--trials", "trials", "number of subspaces");
    add_param<std::size_t>(sc, "--median-trials", "median_trials", "samples for m = Med max g_i^2");
  }
  {
    auto& sc = make("dvoretzky-dim", "Dvoretzky dimension (E||G|| / Lip)^2", "samples");
    add_body_flags(sc, false);
  }
  {
    auto& sc = make("ellipse-check", "closed-form disk/ellipse distance against the brute-force search", "");
    add_param<std::size_t>(sc, "--pairs", "pairs", "random (a, b) pairs");
    add_param<std::size_t>(sc, "--grid", "grid", "log-grid size");
    add_param<double>(sc, "--tolerance", "tolerance", "net tolerance");
  }
  {
    auto& sc = make("singular-values", "extreme singular values of Gaussian matrices", "trials");
    add_param<std::size_t>(sc, "--rows", "m", "rows m");
    add_param<std::size_t>(sc, "--k", "k", "columns k");
    add_param<std::size_t>(sc, "--trials", "trials", "number of matrices");
    add_param<std::vector<double>>(sc, "--c", "c_values", "constants c")->delimiter(',');
  }

  auto* check = app.add_subcommand("check", "run the acceptance suite");
  std::string only;
  double tolerance_scale = 1.0, budget_scale = 1.0;
  bool no_determinism = false;
  check->add_option("--only", only, "comma-separated criteria, e.g. A1,A6");
  check->add_option("--tolerance-scale", tolerance_scale, "multiply every tolerance (below 1 tightens)");
  check->add_option("--budget-scale", budget_scale, "multiply sample budgets");
  check->add_flag("--no-determinism", no_determinism, "skip the A9 rerun");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (check->parsed()) return run_check(g, only, tolerance_scale, budget_scale, no_determinism);
    const ellpos::parallel::Execution exec{g.workers, ellpos::parallel::Backend::OpenMP};
    if (!g.manifest.empty()) {
      if (app.get_subcommands().size() > 0) throw std::invalid_argument("--manifest replaces the subcommand");
      return emit(ellpos::run_experiment(ellpos::load_manifest(g.manifest), exec), g);
    }
    for (auto& sc : subs) {
      if (!sc.app->parsed()) continue;
      ellpos::ExperimentManifest m;
      m.experiment = sc.name;
      m.body = body_json(sc.body);
      m.output_path = g.out;
      m.params["seed"] = g.seed;
      if (g.samples) {
        if (sc.samples_key.empty()) throw std::invalid_argument("--samples is not used by " + sc.name);
        m.params[sc.samples_key] = sc.samples_as_list ? ojson::array({*g.samples}) : ojson(*g.samples);
      }
      for (const auto& p : sc.params) {
        if (p.option->count() > 0) m.params[p.key] = p.value();
      }
      return emit(ellpos::run_experiment(m, exec), g);
    }
    std::cerr << app.help();
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid manifest: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "invalid manifest: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
