#pragma once

// Sort-then-slice references for top-k selection and strategy summaries.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

namespace oracle {

// Indices of the k largest values; stable, so ties keep input order.
inline std::vector<std::size_t> top_k_indices(const std::vector<double>& values, std::size_t k) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  order.resize(std::min(k, order.size()));
  return order;
}

inline double mean_of_top(std::vector<double> values, std::size_t k) {
  std::sort(values.begin(), values.end(), std::greater<>());
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) total += values[i];
  return total / static_cast<double>(k);
}

// Median of an unsorted sample (average of the middle pair for even sizes).
inline double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace oracle
