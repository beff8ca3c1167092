#pragma once

// Gauss-Legendre rules on [-1, 1], computed once per size by Newton iteration.

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace isochron {

struct GaussLegendre {
  std::vector<double> x, w;
  explicit GaussLegendre(int n) : x(n), w(n) {
    for (int i = 0; i < n; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int k = 1; k <= n; ++k) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        const double dz = p0 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      x[i] = z;
      w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
  }
};

inline const GaussLegendre& gauss_legendre(int n) {
  thread_local std::vector<std::pair<int, GaussLegendre>> cache;
  for (const auto& [k, g] : cache)
    if (k == n) return g;
  cache.reserve(16);
  cache.emplace_back(n, GaussLegendre(n));
  return cache.back().second;
}

}  // namespace isochron
