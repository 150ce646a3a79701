#pragma once

#include <cstdint>
#include <random>

#include "partnet/types.hpp"

namespace testutil {

using partnet::Matrix;
using partnet::Vector;

// Deterministic generators (no std::distribution, which varies by platform).
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng() % static_cast<uint64_t>(hi - lo + 1));
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = uniform(rng, lo, hi);
  return m;
}

inline Vector random_prob(std::mt19937_64& rng, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 0.1 + uniform01(rng);
  return v / v.sum();
}

inline Vector random_positive(std::mt19937_64& rng, Eigen::Index n, double lo = 0.1,
                              double hi = 1.0) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(rng, lo, hi);
  return v;
}

// Random coupling between given marginals: product of marginals mixed with a
// random doubly-rescaled positive matrix (Sinkhorn-style scaling, few rounds).
inline Matrix random_coupling(std::mt19937_64& rng, const Vector& mu, const Vector& nu) {
  Matrix k(mu.size(), nu.size());
  for (Eigen::Index i = 0; i < k.rows(); ++i)
    for (Eigen::Index j = 0; j < k.cols(); ++j) k(i, j) = 0.2 + uniform01(rng);
  for (int round = 0; round < 400; ++round) {
    for (Eigen::Index i = 0; i < k.rows(); ++i) k.row(i) *= mu[i] / k.row(i).sum();
    for (Eigen::Index j = 0; j < k.cols(); ++j) k.col(j) *= nu[j] / k.col(j).sum();
  }
  return k;
}

inline partnet::PartitionedNetwork random_network(std::mt19937_64& rng, std::vector<int> sizes,
                                                  double density = 1.0) {
  partnet::PartitionedNetwork P;
  P.mode = partnet::Mode::balanced;
  for (size_t i = 0; i < sizes.size(); ++i) {
    partnet::Part part;
    part.name = "p" + std::to_string(i);
    part.size = sizes[i];
    part.mu = random_prob(rng, sizes[i]);
    P.parts.push_back(part);
  }
  for (size_t i = 0; i < sizes.size(); ++i)
    for (size_t j = 0; j < sizes.size(); ++j)
      if (uniform01(rng) < density)
        P.set_block(static_cast<int>(i), static_cast<int>(j),
                    random_matrix(rng, sizes[i], sizes[j]));
  return P;
}

}  // namespace testutil
