#pragma once

#include <span>
#include <vector>

#include "ellpos/bodies.hpp"
#include "ellpos/parallel.hpp"
#include "ellpos/sampler.hpp"

namespace ellpos {

/// Draws n_samples Gaussian vectors G in fixed batches and calls
/// visit(acc, G, ||G||_B, grad_B(G)) for each; returns one accumulator per batch.
/// Batch b reads GaussianStream(split_seed(stream, b)), so the output does not
/// depend on the execution backend or worker count.
template <class Acc, class Visit>
std::vector<Acc> sample_batches(const BodySpec& body, const SeedSpec& stream, std::size_t n_samples,
                                const parallel::Execution& exec, bool with_gradient, const Acc& init,
                                Visit visit) {
  const auto batches = parallel::partition(n_samples);
  std::vector<Acc> out(batches.size(), init);
  const std::size_t n = body.dim();
  parallel::for_each_index(batches.size(), exec, [&](std::size_t b) {
    GaussianStream rng(split_seed(stream, b));
    std::vector<double> g(n), grad(with_gradient ? n : 0);
    Acc& acc = out[b];
    for (std::size_t s = batches[b].begin; s < batches[b].end; ++s) {
      rng.fill(g);
      const double value = with_gradient ? evaluate(body, g, grad) : evaluate_value(body, g);
      visit(acc, std::span<const double>(g), value, std::span<const double>(grad));
    }
  });
  return out;
}

}  // namespace ellpos
