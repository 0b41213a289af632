#include "ellpos/positions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ellpos/sampling.hpp"

namespace ellpos {

namespace {

constexpr std::uint64_t kFinalStream = 1'000'000;
constexpr std::uint64_t kScaleStream = 1'000'001;
constexpr double kDiagFloor = 1e-8;
constexpr double kDiagCeil = 1e8;

double log_det(const std::vector<double>& d) {
  double s = 0.0;
  for (double v : d) s += std::log(v);
  return s;
}

void scale_all(std::vector<double>& d, double s) {
  for (double& v : d) v *= s;
}

}  // namespace

BodySpec ell_norm_normalize(const BodySpec& body, std::size_t n_samples, const SeedSpec& seed,
                            const parallel::Execution& exec) {
  if (n_samples < kMinSamples) throw std::invalid_argument("ell_norm_normalize: need at least 100 samples");
  auto parts = sample_batches(body, main_stream(seed), n_samples, exec, false, Moments{},
                              [](Moments& acc, std::span<const double>, double v, std::span<const double>) { acc.add(v * v); });
  const double ell = parallel::reduce(exec, std::move(parts), Moments::merge).mean;
  std::vector<double> d = body.diag();
  scale_all(d, std::sqrt(ell));
  return body.with_diag(std::move(d));
}

EllPositionResult solve_ell_position(const BodySpec& body, const EllSolveOptions& opts) {
  if (!(opts.step > 0.0) || !(opts.step <= 2.0)) throw std::invalid_argument("solve_ell_position: step must lie in (0, 2]");
  if (opts.samples_schedule.empty()) throw std::invalid_argument("solve_ell_position: empty samples schedule");
  for (std::size_t i = 1; i < opts.samples_schedule.size(); ++i) {
    if (opts.samples_schedule[i] < opts.samples_schedule[i - 1]) {
      throw std::invalid_argument("solve_ell_position: samples schedule must be nondecreasing");
    }
  }
  const auto budget = [&](std::size_t t) {
    return opts.samples_schedule[std::min(t, opts.samples_schedule.size() - 1)];
  };
  const std::size_t final_budget = opts.samples_schedule.back();
  const double n = static_cast<double>(body.dim());

  EllPositionResult out;
  out.seed = opts.seed;
  std::vector<double> d = body.diag();

  auto finish = [&](const std::vector<double>& diag) {
    const auto check = balance_residuals(body.with_diag(diag), final_budget, split_seed(opts.seed, kFinalStream), opts.exec);
    out.diag = diag;
    out.residuals = check.residuals;
    out.residual_se = check.std_errors;
    out.ell_value = check.ell_squared.value;
    out.ell_value_se = check.ell_squared.std_error;
    return check.max_abs_z();
  };

  if (opts.exploit_symmetry && body.permutation_invariant()) {
    const BodySpec scaled = ell_norm_normalize(body, final_budget, split_seed(opts.seed, kScaleStream), opts.exec);
    finish(scaled.diag());
    out.certificate = EllCertificate::Symmetry;
    out.converged = true;
    return out;
  }

  bool stopped = false;
  bool diverged = false;
  std::size_t t = 0;
  std::vector<double> log_sum(d.size(), 0.0);
  std::size_t averaged = 0;

  // one iteration: estimate, renormalize, record; returns the residuals
  auto step_once = [&](std::size_t iter) {
    const auto est = balance_residuals(body.with_diag(d), budget(iter), split_seed(opts.seed, iter), opts.exec);
    const double ell = est.ell_squared.value;
    scale_all(d, std::sqrt(ell));
    EllIteration rec;
    rec.samples = budget(iter);
    rec.max_abs_residual = est.max_abs_residual();
    rec.max_abs_z = est.max_abs_z();
    rec.ell_value = ell;
    rec.log_det = log_det(d);
    rec.log_det_se = 0.5 * n * est.ell_squared.std_error / ell;
    out.trace.push_back(rec);
    return est;
  };
  auto update = [&](const BalanceResiduals& est) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double factor = std::clamp(1.0 + est.residuals[i], 0.25, 4.0);
      d[i] *= std::pow(factor, 0.5 * opts.step);
      if (!(d[i] >= kDiagFloor && d[i] <= kDiagCeil)) diverged = true;
    }
  };

  for (; t < opts.max_iters && !diverged; ++t) {
    const auto est = step_once(t);
    if (est.max_abs_z() <= opts.z_tolerance) {
      stopped = true;
      ++t;
      if (opts.averaging_iters == 0) break;
      // the stopping iterate is the first averaged one
      for (std::size_t i = 0; i < d.size(); ++i) log_sum[i] += std::log(d[i]);
      ++averaged;
      update(est);
      break;
    }
    update(est);
  }
  for (; stopped && averaged < opts.averaging_iters && t < opts.max_iters && !diverged; ++t) {
    const auto est = step_once(t);
    for (std::size_t i = 0; i < d.size(); ++i) log_sum[i] += std::log(d[i]);
    ++averaged;
    update(est);
  }
  out.iterations = t;

  if (diverged) {
    out.diagnostics = "diagonal left [1e-8, 1e8]";
    out.diag = d;
    out.converged = false;
    return out;
  }
  if (!stopped) {
    out.diagnostics = "max_iters reached before the residuals fell within tolerance";
    finish(d);
    out.converged = false;
    return out;
  }
  if (averaged > 0) {
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::exp(log_sum[i] / static_cast<double>(averaged));
  }
  const double z = finish(d);
  out.converged = z <= opts.z_tolerance;
  if (!out.converged) out.diagnostics = "final independent check exceeded the residual tolerance";
  return out;
}

JohnCylinderCheck verify_john_cylinder(const BodySpec& body, const SeedSpec& seed) {
  if (body.family() != Family::CylinderJohn) throw std::invalid_argument("verify_john_cylinder: body must be CylinderJohn");
  const std::size_t n = body.dim();
  constexpr double kTol = 1e-12;
  JohnCylinderCheck out{true, true};
  std::vector<double> u(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (double s : {1.0, -1.0}) {
      std::fill(u.begin(), u.end(), 0.0);
      u[i] = s;
      const double v = norm(body, u);
      if (std::abs(v - 1.0) > kTol) out.contact_points_ok = false;
      if (v > 1.0 + kTol) out.contains_ball = false;
    }
  }
  GaussianStream rng(seed);
  for (int trial = 0; trial < 1000; ++trial) {
    rng.fill(u);
    double len = 0.0;
    for (double v : u) len += v * v;
    len = std::sqrt(len);
    for (double& v : u) v /= len;
    if (norm(body, u) > 1.0 + kTol) out.contains_ball = false;
  }
  return out;
}

nlohmann::ordered_json to_json(const EllPositionResult& r) {
  nlohmann::ordered_json j;
  j["diag"] = r.diag;
  j["residuals"] = r.residuals;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["ell_value"] = r.ell_value;
  j["seed"] = {{"master", r.seed.master}, {"stream", r.seed.stream}};
  j["residual_se"] = r.residual_se;
  j["ell_value_se"] = r.ell_value_se;
  j["certificate"] = r.certificate == EllCertificate::Symmetry ? "symmetry" : "statistical";
  if (!r.diagnostics.empty()) j["diagnostics"] = r.diagnostics;
  return j;
}

}  // namespace ellpos
