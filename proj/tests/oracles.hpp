#pragma once

// Brute-force reference implementations used to freeze expected values.
// Everything here is deliberately independent of the library's fast paths:
// plain loops over the defining formulas.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "partnet/types.hpp"

namespace oracle {

using partnet::Matrix;
using partnet::Vector;

// Quadruple-loop contraction of L(w, w')_{ijkl} = 1/2 |w_ik - w'_jl|^2
// against pi over (k, l).
inline Matrix distortion_contract(const Matrix& w, const Matrix& wp, const Matrix& pi) {
  Matrix out = Matrix::Zero(w.rows(), wp.rows());
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < wp.rows(); ++j)
      for (Eigen::Index k = 0; k < w.cols(); ++k)
        for (Eigen::Index l = 0; l < wp.cols(); ++l) {
          double d = w(i, k) - wp(j, l);
          out(i, j) += 0.5 * d * d * pi(k, l);
        }
  return out;
}

inline double distortion_inner(const Matrix& w, const Matrix& wp, const Matrix& pi_i,
                               const Matrix& pi_j) {
  double s = 0.0;
  for (Eigen::Index a = 0; a < w.rows(); ++a)
    for (Eigen::Index b = 0; b < wp.rows(); ++b)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index d = 0; d < wp.cols(); ++d) {
          double diff = w(a, c) - wp(b, d);
          s += 0.5 * diff * diff * pi_i(a, b) * pi_j(c, d);
        }
  return s;
}

// Direct evaluation of the matching objective by summing the distortion
// tensor over every block pair of the stitched full kernels.
inline double full_objective(const partnet::PartitionedNetwork& P,
                             const partnet::PartitionedNetwork& Q,
                             const partnet::PartitionedCoupling& cpl) {
  const int k = P.num_parts();
  double quad = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      Matrix a = Matrix::Zero(P.part_size(i), P.part_size(j));
      Matrix b = Matrix::Zero(Q.part_size(i), Q.part_size(j));
      if (const Matrix* blk = P.block(i, j)) a = *blk;
      if (const Matrix* blk = Q.block(i, j)) b = *blk;
      quad += distortion_inner(a, b, cpl.blocks[static_cast<size_t>(i)],
                               cpl.blocks[static_cast<size_t>(j)]);
    }
  return 0.5 * quad;
}

inline void permutations(int n, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  do {
    fn(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

// Exact OT on uniform square marginals: Birkhoff vertices are permutations.
inline double min_cost_over_permutations(const Matrix& C) {
  const int n = static_cast<int>(C.rows());
  double best = std::numeric_limits<double>::infinity();
  permutations(n, [&](const std::vector<int>& p) {
    double c = 0.0;
    for (int i = 0; i < n; ++i) c += C(i, p[static_cast<size_t>(i)]);
    best = std::min(best, c);
  });
  return best / static_cast<double>(n);
}

inline double max_score_over_permutations(const Matrix& S) {
  const int n = static_cast<int>(S.rows());
  double best = -std::numeric_limits<double>::infinity();
  permutations(n, [&](const std::vector<int>& p) {
    double c = 0.0;
    for (int i = 0; i < n; ++i) c += S(i, p[static_cast<size_t>(i)]);
    best = std::max(best, c);
  });
  return best;
}

// Euclidean projection onto the simplex by enumerating active sets.
inline Vector simplex_project_enum(const Vector& v) {
  const int n = static_cast<int>(v.size());
  Vector best = Vector::Zero(n);
  double best_dist = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    // Candidate: support = bits of mask, equal shift to sum to one.
    int cnt = 0;
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        ++cnt;
        sum += v[i];
      }
    double tau = (sum - 1.0) / cnt;
    Vector cand = Vector::Zero(n);
    bool ok = true;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        cand[i] = v[i] - tau;
        if (cand[i] < -1e-12) ok = false;
      }
    }
    if (!ok) continue;
    double d = (cand - v).squaredNorm();
    if (d < best_dist) {
      best_dist = d;
      best = cand;
    }
  }
  return best;
}

// Scalar bisection for the 1x1 unbalanced problem:
// min_x c x + rho1 (x log(x/a) - x + a) + rho2 (x log(x/b) - x + b)
//       + eps (x log(x/(a b)) - x + a b).
inline double unbalanced_1x1(double c, double a, double b, double eps, double rho1, double rho2) {
  auto deriv = [&](double x) {
    return c + rho1 * std::log(x / a) + rho2 * std::log(x / b) + eps * std::log(x / (a * b));
  };
  double lo = 1e-12, hi = 1e12;
  for (int it = 0; it < 400; ++it) {
    double mid = std::sqrt(lo * hi);
    if (deriv(mid) > 0.0) hi = mid;
    else lo = mid;
  }
  return std::sqrt(lo * hi);
}

}  // namespace oracle
