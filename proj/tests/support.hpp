#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "clipscope/embedding.hpp"

namespace support {

// Test-side generator, independent of the library's Rng.
struct Gen {
  std::mt19937_64 eng;
  explicit Gen(std::uint64_t seed) : eng(seed) {}
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(eng);
  }
  double gauss() { return std::normal_distribution<double>(0.0, 1.0)(eng); }

  std::vector<double> unit(std::size_t dim) {
    std::vector<double> v(dim);
    double n2 = 0.0;
    while (n2 < 1e-6) {
      n2 = 0.0;
      for (double& x : v) {
        x = gauss();
        n2 += x * x;
      }
    }
    for (double& x : v) x /= std::sqrt(n2);
    return v;
  }

  clipscope::EmbeddingTable table(std::size_t n, std::size_t dim, const std::string& prefix) {
    std::vector<std::string> labels;
    std::vector<double> data;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back(prefix + std::to_string(i));
      auto v = unit(dim);
      data.insert(data.end(), v.begin(), v.end());
    }
    return clipscope::EmbeddingTable(dim, std::move(labels), std::move(data));
  }
};

inline bool rel_close(double a, double b, double rel) {
  return std::fabs(a - b) <= rel * std::max(std::fabs(a), std::fabs(b));
}

}  // namespace support
