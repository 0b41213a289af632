#include "ellpos/bodies.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "ellpos/stats.hpp"

namespace ellpos {

namespace {

bool is_integer(double p) { return p == std::floor(p) && p <= 16.0; }

double ipow(double x, int k) {
  double r = 1.0;
  while (k > 0) {
    if (k & 1) r *= x;
    x *= x;
    k >>= 1;
  }
  return r;
}

double power(double x, double p) { return is_integer(p) ? ipow(x, static_cast<int>(p)) : std::pow(x, p); }

void check_positive_finite(const std::vector<double>& v, std::size_t n, const char* what) {
  if (v.size() != n) throw std::invalid_argument(std::string(what) + ": length must equal dim");
  for (double x : v) {
    if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": entries must be positive and finite");
  }
}

void check_input(const BodySpec& body, std::span<const double> x) {
  if (x.size() != body.dim()) throw std::invalid_argument("dimension mismatch");
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite input component");
  }
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// max |a_i x_i| over [lo, hi), lowest index on ties
std::pair<double, std::size_t> abs_max(std::span<const double> a, std::span<const double> x, std::size_t lo, std::size_t hi) {
  double best = -1.0;
  std::size_t at = lo;
  for (std::size_t i = lo; i < hi; ++i) {
    const double v = std::abs(a[i] * x[i]);
    if (v > best) {
      best = v;
      at = i;
    }
  }
  return {best, at};
}

double euclid(std::span<const double> a, std::span<const double> x, std::size_t lo, std::size_t hi) {
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    const double y = a[i] * x[i];
    s += y * y;
  }
  const double r = std::sqrt(s);
  if (std::isfinite(r) && r > 1e-150) return r;
  // rescaled fallback for overflow/underflow
  const double mx = abs_max(a, x, lo, hi).first;
  if (mx == 0.0) return 0.0;
  s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    const double y = a[i] * x[i] / mx;
    s += y * y;
  }
  return mx * std::sqrt(s);
}

double lp_value(std::span<const double> a, std::span<const double> x, double p) {
  const std::size_t n = x.size();
  if (p == 1.0) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::abs(a[i] * x[i]);
    return s;
  }
  if (p == 2.0) return euclid(a, x, 0, n);
  const double mx = abs_max(a, x, 0, n).first;
  if (mx == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += power(std::abs(a[i] * x[i]) / mx, p);
  return mx * std::pow(s, 1.0 / p);
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::Cube: return "Cube";
    case Family::LpBall: return "LpBall";
    case Family::WeightedLp: return "WeightedLp";
    case Family::CylinderJohn: return "CylinderJohn";
  }
  return "Cube";
}

Family family_from_name(const std::string& name) {
  if (name == "Cube") return Family::Cube;
  if (name == "LpBall" || name == "Euclidean") return Family::LpBall;
  if (name == "WeightedLp") return Family::WeightedLp;
  if (name == "CylinderJohn") return Family::CylinderJohn;
  throw std::invalid_argument("unknown body family: " + name);
}

BodySpec::BodySpec(Family family, std::size_t n, double p, std::size_t m, std::vector<double> weights,
                   std::vector<double> diag)
    : family_(family), p_(p), m_(m), weights_(std::move(weights)), diag_(std::move(diag)) {
  if (n < 2) throw std::invalid_argument("body dimension must be at least 2");
  if (diag_.empty()) diag_.assign(n, 1.0);
  check_positive_finite(diag_, n, "diag");
  if (family_ == Family::LpBall || family_ == Family::WeightedLp) {
    if (!(p_ >= 1.0) || !std::isfinite(p_)) throw std::invalid_argument("p must be a finite real >= 1");
  }
  if (family_ == Family::WeightedLp) check_positive_finite(weights_, n, "weights");
  if (family_ == Family::CylinderJohn && (m_ < 1 || m_ >= n)) {
    throw std::invalid_argument("CylinderJohn requires 1 <= m < n");
  }
  rebuild_scale();
}

void BodySpec::rebuild_scale() {
  inv_scale_.resize(diag_.size());
  for (std::size_t i = 0; i < diag_.size(); ++i) {
    double a = 1.0 / diag_[i];
    if (family_ == Family::WeightedLp) a *= std::pow(weights_[i], 1.0 / p_);
    inv_scale_[i] = a;
  }
}

BodySpec BodySpec::cube(std::size_t n) { return {Family::Cube, n, 0.0, 0, {}, {}}; }

BodySpec BodySpec::lp_ball(std::size_t n, double p) { return {Family::LpBall, n, p, 0, {}, {}}; }

BodySpec BodySpec::weighted_lp(std::size_t n, double p, std::vector<double> weights) {
  return {Family::WeightedLp, n, p, 0, std::move(weights), {}};
}

BodySpec BodySpec::cylinder_john(std::size_t n, std::size_t m) { return {Family::CylinderJohn, n, 0.0, m, {}, {}}; }

BodySpec BodySpec::with_diag(std::vector<double> diag) const {
  return {family_, dim(), p_, m_, weights_, std::move(diag)};
}

bool BodySpec::permutation_invariant() const {
  if (family_ != Family::Cube && family_ != Family::LpBall) return false;
  return std::all_of(diag_.begin(), diag_.end(), [&](double d) { return d == diag_.front(); });
}

double evaluate_value(const BodySpec& body, std::span<const double> x) {
  const auto a = body.inv_scale();
  const std::size_t n = x.size();
  switch (body.family()) {
    case Family::Cube: return abs_max(a, x, 0, n).first;
    case Family::LpBall:
    case Family::WeightedLp: return lp_value(a, x, body.p());
    case Family::CylinderJohn: {
      const std::size_t split = n - body.m();
      return std::max(abs_max(a, x, 0, split).first, euclid(a, x, split, n));
    }
  }
  return 0.0;
}

double evaluate(const BodySpec& body, std::span<const double> x, std::span<double> grad) {
  const auto a = body.inv_scale();
  const std::size_t n = x.size();
  std::fill(grad.begin(), grad.end(), 0.0);
  switch (body.family()) {
    case Family::Cube: {
      const auto [value, at] = abs_max(a, x, 0, n);
      if (value > 0.0) grad[at] = sign(x[at]) * a[at];
      return value;
    }
    case Family::LpBall:
    case Family::WeightedLp: {
      const double p = body.p();
      const double value = lp_value(a, x, p);
      if (value == 0.0) return 0.0;
      if (p == 1.0) {
        for (std::size_t i = 0; i < n; ++i) grad[i] = sign(x[i]) * a[i];
      } else if (p == 2.0) {
        for (std::size_t i = 0; i < n; ++i) grad[i] = a[i] * (a[i] * x[i]) / value;
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          const double y = a[i] * x[i];
          grad[i] = sign(y) * a[i] * power(std::abs(y) / value, p - 1.0);
        }
      }
      return value;
    }
    case Family::CylinderJohn: {
      const std::size_t split = n - body.m();
      const auto [head, at] = abs_max(a, x, 0, split);
      const double tail = euclid(a, x, split, n);
      if (head >= tail) {
        if (head > 0.0) grad[at] = sign(x[at]) * a[at];
        return head;
      }
      for (std::size_t i = split; i < n; ++i) grad[i] = a[i] * (a[i] * x[i]) / tail;
      return tail;
    }
  }
  return 0.0;
}

double norm(const BodySpec& body, std::span<const double> x) {
  check_input(body, x);
  return evaluate_value(body, x);
}

NormEvaluation gradient(const BodySpec& body, std::span<const double> x) {
  check_input(body, x);
  if (std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; })) {
    throw std::domain_error("gradient is undefined at the origin");
  }
  NormEvaluation out;
  out.gradient.resize(x.size());
  out.value = evaluate(body, x, out.gradient);
  return out;
}

double lipschitz_constant(const BodySpec& body) {
  const auto a = body.inv_scale();
  const double amax = *std::max_element(a.begin(), a.end());
  switch (body.family()) {
    case Family::Cube:
    case Family::CylinderJohn: return amax;
    case Family::LpBall:
    case Family::WeightedLp: {
      const double p = body.p();
      if (p >= 2.0) return amax;
      // Hölder: sup_{|x|_2=1} (sum |a_i x_i|^p)^{1/p} = ||a||_q, q = 2p/(2-p)
      const double q = 2.0 * p / (2.0 - p);
      double s = 0.0;
      for (double v : a) s += std::pow(v / amax, q);
      return amax * std::pow(s, 1.0 / q);
    }
  }
  return amax;
}

double lipschitz_multistart(const BodySpec& body, std::size_t starts, const SeedSpec& seed) {
  const std::size_t n = body.dim();
  std::vector<double> u(n), trial(n), grad(n);
  double best = 0.0;
  for (std::size_t s = 0; s < starts; ++s) {
    GaussianStream rng(split_seed(seed, s));
    rng.fill(u);
    double len = 0.0;
    for (double v : u) len += v * v;
    len = std::sqrt(len);
    for (double& v : u) v /= len;
    double value = evaluate(body, u, grad);
    double step = 1.0;
    for (int it = 0; it < 500 && step > 1e-12; ++it) {
      double radial = 0.0;
      for (std::size_t i = 0; i < n; ++i) radial += grad[i] * u[i];
      double tl = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        trial[i] = u[i] + step * (grad[i] - radial * u[i]);
        tl += trial[i] * trial[i];
      }
      tl = std::sqrt(tl);
      for (double& v : trial) v /= tl;
      const double candidate = evaluate_value(body, trial);
      if (candidate > value) {
        u.swap(trial);
        value = evaluate(body, u, grad);
      } else {
        step *= 0.5;
      }
    }
    best = std::max(best, value);
  }
  return best;
}

BodySpec apply_diagonal(const BodySpec& body, std::span<const double> d) {
  if (d.size() != body.dim()) throw std::invalid_argument("apply_diagonal: length must equal dim");
  std::vector<double> diag = body.diag();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0) || !std::isfinite(d[i])) throw std::invalid_argument("apply_diagonal: entries must be positive");
    diag[i] *= d[i];
  }
  return body.with_diag(std::move(diag));
}

double median_max_gaussian_square(std::size_t n, std::size_t trials, const SeedSpec& seed,
                                  const parallel::Execution& exec) {
  if (n == 0 || trials == 0) throw std::invalid_argument("median_max_gaussian_square: empty request");
  const auto batches = parallel::partition(trials);
  std::vector<std::vector<double>> per_batch(batches.size());
  parallel::for_each_index(batches.size(), exec, [&](std::size_t b) {
    GaussianStream rng(split_seed(seed, b));
    std::vector<double> g(n);
    auto& out = per_batch[b];
    out.reserve(batches[b].size());
    for (std::size_t t = batches[b].begin; t < batches[b].end; ++t) {
      rng.fill(g);
      double mx = 0.0;
      for (double v : g) mx = std::max(mx, v * v);
      out.push_back(mx);
    }
  });
  std::vector<double> all;
  all.reserve(trials);
  for (const auto& v : per_batch) all.insert(all.end(), v.begin(), v.end());
  return sample_median(std::move(all));
}

BodySpec make_cylinder_john_body(std::size_t n, const SeedSpec& seed, CylinderOptions opts,
                                 const parallel::Execution& exec) {
  if (n < opts.n_floor) throw std::invalid_argument("make_cylinder_john_body: n below floor");
  const double med = median_max_gaussian_square(n, opts.trials, seed, exec);
  const auto m = static_cast<std::size_t>(std::floor(med));
  if (m < 1 || m >= n) throw std::invalid_argument("make_cylinder_john_body: m out of range");
  return BodySpec::cylinder_john(n, m);
}

nlohmann::ordered_json to_json(const BodySpec& body) {
  nlohmann::ordered_json j;
  j["family"] = family_name(body.family());
  j["dim"] = body.dim();
  if (body.family() == Family::CylinderJohn) j["m"] = body.m();
  if (body.family() == Family::LpBall || body.family() == Family::WeightedLp) j["p"] = body.p();
  if (body.family() == Family::WeightedLp) j["weights"] = body.weights();
  j["diag"] = body.diag();
  return j;
}

BodySpec body_from_json(const nlohmann::json& j) {
  const std::string name = j.at("family").get<std::string>();
  const Family family = family_from_name(name);
  const auto n = j.at("dim").get<std::size_t>();
  BodySpec body = BodySpec::cube(n);
  switch (family) {
    case Family::Cube: break;
    case Family::LpBall: body = BodySpec::lp_ball(n, name == "Euclidean" ? 2.0 : j.at("p").get<double>()); break;
    case Family::WeightedLp:
      body = BodySpec::weighted_lp(n, j.at("p").get<double>(), j.at("weights").get<std::vector<double>>());
      break;
    case Family::CylinderJohn: body = BodySpec::cylinder_john(n, j.at("m").get<std::size_t>()); break;
  }
  if (j.contains("diag")) body = body.with_diag(j.at("diag").get<std::vector<double>>());
  return body;
}

std::string body_hash(const BodySpec& body) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : to_json(body).dump()) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ellpos
