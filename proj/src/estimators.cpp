#include "ellpos/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ellpos/sampling.hpp"

namespace ellpos {

namespace {

constexpr std::size_t kPilotCap = 100000;

void check_budget(double p, std::size_t n_samples) {
  if (!(p >= 1.0) || !(p <= kMaxMomentOrder)) throw std::invalid_argument("moment order p must lie in [1, 8]");
  if (n_samples < kMinSamples) throw std::invalid_argument("sample budget must be at least 100");
}

double pow_p(double x, double p) {
  if (p == 1.0) return x;
  if (p == 2.0) return x * x;
  return std::pow(x, p);
}

double sq_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

void add_into(std::vector<double>& into, const std::vector<double>& from) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

McEstimate pilot_mean(const BodySpec& body, std::size_t n_samples, const SeedSpec& seed,
                      const parallel::Execution& exec) {
  const SeedSpec stream = pilot_stream(seed);
  auto parts = sample_batches(body, stream, std::min(n_samples, kPilotCap), exec, false, Moments{},
                              [](Moments& acc, std::span<const double>, double v, std::span<const double>) { acc.add(v); });
  return to_estimate(parallel::reduce(exec, std::move(parts), Moments::merge), stream);
}

// Everything the superconcentration report needs, from one pass.
struct EnergyAcc {
  Moments f;
  Moments energy;
  std::vector<double> abs_sum;
  std::vector<double> sq_sum;
  std::vector<double> spiky_count;
  double flat = 0.0;
  double spiky = 0.0;
};

EnergyAcc merge_energy(EnergyAcc a, EnergyAcc b) {
  a.f = Moments::merge(a.f, b.f);
  a.energy = Moments::merge(a.energy, b.energy);
  add_into(a.abs_sum, b.abs_sum);
  add_into(a.sq_sum, b.sq_sum);
  add_into(a.spiky_count, b.spiky_count);
  a.flat += b.flat;
  a.spiky += b.spiky;
  return a;
}

struct EnergyPass {
  std::vector<EnergyAcc> batches;
  EnergyAcc total;
};

EnergyPass energy_pass(const BodySpec& body, double p, std::size_t n_samples, const SeedSpec& seed,
                       double threshold, const parallel::Execution& exec) {
  const std::size_t n = body.dim();
  EnergyAcc init;
  init.abs_sum.assign(n, 0.0);
  init.sq_sum.assign(n, 0.0);
  init.spiky_count.assign(n, 0.0);
  auto parts = sample_batches(body, main_stream(seed), n_samples, exec, true, init,
                              [&](EnergyAcc& acc, std::span<const double>, double v, std::span<const double> grad) {
                                const double vp = pow_p(v, p);
                                const double weight = p * (p == 1.0 ? 1.0 : pow_p(v, p - 1.0));  // |d_i f| = weight |grad_i|
                                const double w2 = weight * weight;
                                acc.f.add(vp);
                                double flat = 0.0, spiky = 0.0;
                                for (std::size_t i = 0; i < grad.size(); ++i) {
                                  const double gi = grad[i];
                                  const double d = weight * std::abs(gi);
                                  acc.abs_sum[i] += d;
                                  acc.sq_sum[i] += d * d;
                                  if (std::abs(gi) > threshold) {
                                    spiky += gi * gi;
                                    acc.spiky_count[i] += 1.0;
                                  } else {
                                    flat += gi * gi;
                                  }
                                }
                                acc.energy.add(w2 * (flat + spiky));
                                acc.flat += w2 * flat;
                                acc.spiky += w2 * spiky;
                              });
  EnergyPass out;
  out.total = parallel::reduce(exec, parts, merge_energy);
  out.batches = std::move(parts);
  return out;
}

std::vector<double> talagrand_moments_rhs(const EnergyAcc& total, std::size_t n_samples, double& rhs) {
  const double inv = 1.0 / static_cast<double>(n_samples);
  std::vector<double> m1(total.abs_sum.size()), m2(total.sq_sum.size());
  for (std::size_t i = 0; i < m1.size(); ++i) {
    m1[i] = total.abs_sum[i] * inv;
    m2[i] = total.sq_sum[i] * inv;
  }
  rhs = talagrand_sum(m1, m2);
  return m2;
}

double threshold_for(const BodySpec& body, double exponent, const McEstimate& pilot) {
  return std::pow(static_cast<double>(body.dim()), -exponent) * pilot.value;
}

}  // namespace

SeedSpec main_stream(const SeedSpec& seed) { return split_seed(seed, 0); }
SeedSpec pilot_stream(const SeedSpec& seed) { return split_seed(seed, 1); }

NormMoments norm_moments(const BodySpec& body, double p, std::size_t n_samples, const SeedSpec& seed,
                         const parallel::Execution& exec) {
  check_budget(p, n_samples);
  struct Acc {
    Moments m1, m2, mp;
    std::vector<double> values;
  };
  const SeedSpec stream = main_stream(seed);
  auto parts = sample_batches(body, stream, n_samples, exec, false, Acc{},
                              [&](Acc& acc, std::span<const double>, double v, std::span<const double>) {
                                acc.m1.add(v);
                                acc.m2.add(v * v);
                                acc.mp.add(pow_p(v, p));
                                acc.values.push_back(v);
                              });
  std::vector<double> batch_var(parts.size());
  std::vector<double> values;
  values.reserve(n_samples);
  std::vector<Moments> m1(parts.size()), m2(parts.size()), mp(parts.size());
  for (std::size_t b = 0; b < parts.size(); ++b) {
    batch_var[b] = parts[b].mp.variance();
    values.insert(values.end(), parts[b].values.begin(), parts[b].values.end());
    m1[b] = parts[b].m1;
    m2[b] = parts[b].m2;
    mp[b] = parts[b].mp;
  }
  NormMoments out;
  out.p = p;
  const Moments tp = parallel::reduce(exec, std::move(mp), Moments::merge);
  out.mean_p = to_estimate(tp, stream);
  out.var_p = {tp.variance(), batch_means_se(batch_var), n_samples, stream};
  out.mean_1 = to_estimate(parallel::reduce(exec, std::move(m1), Moments::merge), stream);
  out.mean_2 = to_estimate(parallel::reduce(exec, std::move(m2), Moments::merge), stream);
  out.median = sample_median(std::move(values));
  return out;
}

McEstimate gradient_energy(const BodySpec& body, double p, std::size_t n_samples, const SeedSpec& seed,
                           const parallel::Execution& exec) {
  check_budget(p, n_samples);
  const SeedSpec stream = main_stream(seed);
  auto parts = sample_batches(body, stream, n_samples, exec, true, Moments{},
                              [&](Moments& acc, std::span<const double>, double v, std::span<const double> grad) {
                                const double weight = p * (p == 1.0 ? 1.0 : pow_p(v, p - 1.0));
                                acc.add(weight * weight * sq_norm(grad));
                              });
  return to_estimate(parallel::reduce(exec, std::move(parts), Moments::merge), stream);
}

FlatSpikyStats flat_spiky_stats(const BodySpec& body, double p, std::size_t n_samples, const SeedSpec& seed,
                                double threshold_exponent, const parallel::Execution& exec) {
  check_budget(p, n_samples);
  FlatSpikyStats out;
  out.pilot_mean = pilot_mean(body, n_samples, seed, exec);
  out.threshold = threshold_for(body, threshold_exponent, out.pilot_mean);
  const auto pass = energy_pass(body, p, n_samples, seed, out.threshold, exec);
  const double inv = 1.0 / static_cast<double>(n_samples);
  out.flat_energy = pass.total.flat * inv;
  out.spiky_energy = pass.total.spiky * inv;
  out.spiky_prob_per_coord = *std::max_element(pass.total.spiky_count.begin(), pass.total.spiky_count.end()) * inv;
  return out;
}

double talagrand_sum(std::span<const double> m1, std::span<const double> m2) {
  if (m1.size() != m2.size()) throw std::invalid_argument("talagrand_sum: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < m1.size(); ++i) {
    if (m2[i] <= 0.0 || m1[i] <= 0.0) continue;
    total += m2[i] / (1.0 + std::log(std::sqrt(m2[i]) / m1[i]));
  }
  return total;
}

double talagrand_rhs(const BodySpec& body, double p, std::size_t n_samples, const SeedSpec& seed,
                     const parallel::Execution& exec) {
  check_budget(p, n_samples);
  // the threshold is irrelevant for the per-coordinate moments
  const auto pass = energy_pass(body, p, n_samples, seed, 0.0, exec);
  double rhs = 0.0;
  talagrand_moments_rhs(pass.total, n_samples, rhs);
  return rhs;
}

SuperconcentrationReport superconcentration_ratio(const BodySpec& body, double p, std::size_t n_samples,
                                                  const SeedSpec& seed, double threshold_exponent,
                                                  const parallel::Execution& exec) {
  check_budget(p, n_samples);
  const McEstimate pilot = pilot_mean(body, n_samples, seed, exec);
  const double threshold = threshold_for(body, threshold_exponent, pilot);
  const auto pass = energy_pass(body, p, n_samples, seed, threshold, exec);
  const SeedSpec stream = main_stream(seed);

  SuperconcentrationReport out;
  out.p = p;
  out.gradient_energy = to_estimate(pass.total.energy, stream);
  if (!(out.gradient_energy.value > 3.0 * out.gradient_energy.std_error) || out.gradient_energy.value <= 0.0) {
    throw std::runtime_error("superconcentration_ratio: gradient energy indistinguishable from zero");
  }
  const double var = pass.total.f.variance();
  out.ratio = var / out.gradient_energy.value;

  std::vector<double> batch_var, linearized;
  for (const auto& b : pass.batches) {
    batch_var.push_back(b.f.variance());
    linearized.push_back((b.f.variance() - out.ratio * b.energy.mean) / out.gradient_energy.value);
  }
  out.variance = {var, batch_means_se(batch_var), n_samples, stream};
  out.ratio_se = batch_means_se(linearized);
  talagrand_moments_rhs(pass.total, n_samples, out.talagrand_rhs);
  const double inv = 1.0 / static_cast<double>(n_samples);
  out.flat_energy = pass.total.flat * inv;
  out.spiky_energy = pass.total.spiky * inv;
  out.spiky_prob_per_coord = *std::max_element(pass.total.spiky_count.begin(), pass.total.spiky_count.end()) * inv;
  return out;
}

double BalanceResiduals::max_abs_z() const {
  double z = 0.0;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const double r = std::abs(residuals[i]);
    if (std_errors[i] > 0.0) {
      z = std::max(z, r / std_errors[i]);
    } else if (r > 0.0) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return z;
}

double BalanceResiduals::max_abs_residual() const {
  double r = 0.0;
  for (double v : residuals) r = std::max(r, std::abs(v));
  return r;
}

BalanceResiduals balance_residuals(const BodySpec& body, std::size_t n_samples, const SeedSpec& seed,
                                   const parallel::Execution& exec) {
  if (n_samples < 1000) throw std::invalid_argument("balance_residuals: need at least 1000 samples");
  const std::size_t n = body.dim();
  struct Acc {
    std::vector<double> a;  // sum ||G|| grad_i G_i
    Moments ell;            // ||G||^2
  };
  const SeedSpec stream = main_stream(seed);
  auto parts = sample_batches(body, stream, n_samples, exec, true, Acc{std::vector<double>(n, 0.0), {}},
                              [](Acc& acc, std::span<const double> g, double v, std::span<const double> grad) {
                                for (std::size_t i = 0; i < g.size(); ++i) acc.a[i] += v * grad[i] * g[i];
                                acc.ell.add(v * v);
                              });
  const auto total = parallel::reduce(exec, parts, [](Acc x, const Acc& y) {
    add_into(x.a, y.a);
    x.ell = Moments::merge(x.ell, y.ell);
    return x;
  });
  const double big_n = static_cast<double>(n_samples);
  const double ell = total.ell.mean;
  const double dim = static_cast<double>(n);

  BalanceResiduals out;
  out.ell_squared = to_estimate(total.ell, stream);
  out.residuals.resize(n);
  out.std_errors.resize(n);
  std::vector<double> psi(parts.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double a_mean = total.a[i] / big_n;
    out.residuals[i] = dim * a_mean / ell - 1.0;
    for (std::size_t b = 0; b < parts.size(); ++b) {
      const double a_b = parts[b].a[i] / parts[b].ell.count;
      psi[b] = dim / ell * (a_b - (a_mean / ell) * parts[b].ell.mean);
    }
    out.std_errors[i] = batch_means_se(psi);
  }
  return out;
}

McEstimate dvoretzky_dimension(const BodySpec& body, std::size_t n_samples, const SeedSpec& seed,
                               const parallel::Execution& exec) {
  check_budget(1.0, n_samples);
  const SeedSpec stream = main_stream(seed);
  auto parts = sample_batches(body, stream, n_samples, exec, false, Moments{},
                              [](Moments& acc, std::span<const double>, double v, std::span<const double>) { acc.add(v); });
  const McEstimate mean = to_estimate(parallel::reduce(exec, std::move(parts), Moments::merge), stream);
  const double lip = lipschitz_constant(body);
  const double k = (mean.value / lip) * (mean.value / lip);
  return {k, 2.0 * mean.value * mean.std_error / (lip * lip), n_samples, stream};
}

GradientRatioCondition gradient_ratio_condition(const BodySpec& body, double c, std::size_t n_samples,
                                                const SeedSpec& seed, const parallel::Execution& exec) {
  if (!(c > 0.0) || !(c <= 0.5)) throw std::invalid_argument("gradient_ratio_condition: c must lie in (0, 1/2]");
  check_budget(1.0, n_samples);
  struct Acc {
    Moments value, grad;
  };
  const SeedSpec stream = main_stream(seed);
  auto parts = sample_batches(body, stream, n_samples, exec, true, Acc{},
                              [](Acc& acc, std::span<const double>, double v, std::span<const double> grad) {
                                acc.value.add(v);
                                acc.grad.add(std::sqrt(sq_norm(grad)));
                              });
  const auto total = parallel::reduce(exec, std::move(parts), [](Acc x, const Acc& y) {
    x.value = Moments::merge(x.value, y.value);
    x.grad = Moments::merge(x.grad, y.grad);
    return x;
  });
  GradientRatioCondition out;
  out.lhs = to_estimate(total.value, stream);
  out.mean_grad = to_estimate(total.grad, stream);
  const double scale = std::pow(static_cast<double>(body.dim()), c);
  out.rhs = scale * out.mean_grad.value;
  out.combined_se = std::hypot(out.lhs.std_error, scale * out.mean_grad.std_error);
  out.holds = out.lhs.value <= out.rhs + 3.0 * out.combined_se;
  return out;
}

DeviationCurve deviation_curve(const BodySpec& body, std::span<const double> eps_grid, std::size_t n_samples,
                               const SeedSpec& seed, std::size_t median_samples,
                               const parallel::Execution& exec) {
  if (eps_grid.empty()) throw std::invalid_argument("deviation_curve: empty eps grid");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0) || !std::isfinite(eps_grid[i])) throw std::invalid_argument("deviation_curve: eps must be positive");
    if (i > 0 && !(eps_grid[i] > eps_grid[i - 1])) throw std::invalid_argument("deviation_curve: eps grid must ascend");
  }
  if (n_samples < 10000) throw std::invalid_argument("deviation_curve: need at least 10^4 samples");
  if (median_samples == 0) median_samples = n_samples;

  using Values = std::vector<double>;
  auto med_parts = sample_batches(body, pilot_stream(seed), median_samples, exec, false, Values{},
                                  [](Values& acc, std::span<const double>, double v, std::span<const double>) { acc.push_back(v); });
  Values all;
  all.reserve(median_samples);
  for (const auto& part : med_parts) all.insert(all.end(), part.begin(), part.end());
  const double median = sample_median(std::move(all));

  const std::size_t k = eps_grid.size();
  using Counts = std::vector<std::size_t>;
  auto parts = sample_batches(body, main_stream(seed), n_samples, exec, false, Counts(k, 0),
                              [&](Counts& acc, std::span<const double>, double v, std::span<const double>) {
                                const double dev = std::abs(v - median);
                                for (std::size_t j = 0; j < k && dev >= eps_grid[j] * median; ++j) ++acc[j];
                              });
  const Counts counts = parallel::reduce(exec, std::move(parts), [](Counts x, const Counts& y) {
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += y[j];
    return x;
  });

  DeviationCurve out;
  out.n = body.dim();
  out.eps_grid.assign(eps_grid.begin(), eps_grid.end());
  out.median = median;
  out.counts = counts;
  out.n_samples = n_samples;
  out.median_samples = median_samples;
  out.seed = seed;
  for (std::size_t j = 0; j < k; ++j) {
    out.probs.push_back(static_cast<double>(counts[j]) / static_cast<double>(n_samples));
    const auto band = wilson_interval(counts[j], n_samples);
    out.wilson_low.push_back(band.low);
    out.wilson_high.push_back(band.high);
  }
  return out;
}

L1GradientCheck l1_gradient_check(const BodySpec& body, double p, std::size_t n_samples, const SeedSpec& seed,
                                  const parallel::Execution& exec) {
  check_budget(p, n_samples);
  const double factor = std::pow(std::numbers::pi / 2.0, p / 2.0);
  struct Acc {
    Moments lhs, rhs, diff;
  };
  auto parts = sample_batches(body, main_stream(seed), n_samples, exec, true, Acc{},
                              [&](Acc& acc, std::span<const double>, double v, std::span<const double> grad) {
                                double l1 = 0.0;
                                for (double gi : grad) l1 += std::abs(gi);
                                const double l = pow_p(l1, p);
                                const double r = factor * pow_p(v, p);
                                acc.lhs.add(l);
                                acc.rhs.add(r);
                                acc.diff.add(r - l);
                              });
  const auto total = parallel::reduce(exec, std::move(parts), [](Acc x, const Acc& y) {
    x.lhs = Moments::merge(x.lhs, y.lhs);
    x.rhs = Moments::merge(x.rhs, y.rhs);
    x.diff = Moments::merge(x.diff, y.diff);
    return x;
  });
  L1GradientCheck out;
  out.lhs = total.lhs.mean;
  out.rhs = total.rhs.mean;
  out.raw_margin = total.diff.mean;
  out.std_error = std::sqrt(total.diff.variance() / total.diff.count);
  out.margin = out.raw_margin + 3.0 * out.std_error;
  out.holds = out.margin >= 0.0;
  return out;
}

}  // namespace ellpos
