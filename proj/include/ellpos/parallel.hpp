#pragma once

// Batch-parallel execution with two interchangeable backends.
//
// Work is always cut into the same fixed set of batches (independent of the
// worker count), each seeded by split_seed(stream, batch). The OpenMP backend
// runs batches concurrently and combines their partial results with a fixed
// pairwise tree, so results are bit-identical for any number of workers. The
// serial reference backend runs the batches in order and folds them left to
// right; it exists as an independent path for tests and benchmarks.

#include <cstddef>
#include <utility>
#include <vector>

#include <omp.h>

namespace ellpos::parallel {

enum class Backend { OpenMP, SerialReference };

struct Execution {
  int workers = 0;  // 0: OpenMP default
  Backend backend = Backend::OpenMP;
};

inline constexpr std::size_t kBatchCount = 64;

struct BatchRange {
  std::size_t index = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Splits [0, total) into `batches` contiguous ranges, sizes differing by at most one.
inline std::vector<BatchRange> partition(std::size_t total, std::size_t batches = kBatchCount) {
  std::vector<BatchRange> out(batches);
  const std::size_t base = total / batches;
  const std::size_t extra = total % batches;
  std::size_t at = 0;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t len = base + (b < extra ? 1 : 0);
    out[b] = {b, at, at + len};
    at += len;
  }
  return out;
}

template <class Fn>
void for_each_index(std::size_t count, const Execution& exec, Fn&& fn) {
  if (exec.backend == Backend::SerialReference) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const int workers = exec.workers > 0 ? exec.workers : omp_get_max_threads();
  const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (long long i = 0; i < n; ++i) fn(static_cast<std::size_t>(i));
}

/// Fixed pairwise tree: level by level, (0,1), (2,3), ... ; odd tail carried up.
template <class T, class Merge>
T tree_reduce(std::vector<T> parts, Merge merge) {
  while (parts.size() > 1) {
    std::vector<T> next;
    next.reserve((parts.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2) {
      next.push_back(merge(std::move(parts[i]), std::move(parts[i + 1])));
    }
    if (parts.size() % 2 == 1) next.push_back(std::move(parts.back()));
    parts = std::move(next);
  }
  return std::move(parts.front());
}

template <class T, class Merge>
T linear_reduce(std::vector<T> parts, Merge merge) {
  T acc = std::move(parts.front());
  for (std::size_t i = 1; i < parts.size(); ++i) acc = merge(std::move(acc), std::move(parts[i]));
  return acc;
}

template <class T, class Merge>
T reduce(const Execution& exec, std::vector<T> parts, Merge merge) {
  if (exec.backend == Backend::SerialReference) return linear_reduce(std::move(parts), merge);
  return tree_reduce(std::move(parts), merge);
}

}  // namespace ellpos::parallel
