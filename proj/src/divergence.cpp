#include "partnet/divergence.hpp"

#include <cmath>
#include <limits>

namespace partnet {

namespace {

// Shared kernel over raw buffers; computes (H, |a|, |b|) in one pass.
struct Accum {
  double h = 0.0;
  double mass_a = 0.0;
  double mass_b = 0.0;
  bool support_violation = false;
};

Accum accumulate(const double* a, const double* b, Eigen::Index n) {
  Accum acc;
  for (Eigen::Index i = 0; i < n; ++i) {
    require(std::isfinite(a[i]) && std::isfinite(b[i]) && a[i] >= 0.0 && b[i] >= 0.0,
            "divergence: inputs must be finite and nonnegative");
    acc.mass_a += a[i];
    acc.mass_b += b[i];
    if (a[i] > 0.0) {
      if (b[i] <= 0.0) acc.support_violation = true;
      else acc.h += a[i] * std::log(a[i] / b[i]);
    }
  }
  return acc;
}

}  // namespace

double relative_entropy(const Matrix& alpha, const Matrix& beta) {
  require(alpha.rows() == beta.rows() && alpha.cols() == beta.cols(), "divergence: shape mismatch");
  Accum acc = accumulate(alpha.data(), beta.data(), alpha.size());
  if (acc.support_violation) return std::numeric_limits<double>::infinity();
  return acc.h;
}

double relative_entropy(const Vector& alpha, const Vector& beta) {
  require(alpha.size() == beta.size(), "divergence: shape mismatch");
  Accum acc = accumulate(alpha.data(), beta.data(), alpha.size());
  if (acc.support_violation) return std::numeric_limits<double>::infinity();
  return acc.h;
}

double kl_divergence(const Matrix& alpha, const Matrix& beta) {
  require(alpha.rows() == beta.rows() && alpha.cols() == beta.cols(), "divergence: shape mismatch");
  Accum acc = accumulate(alpha.data(), beta.data(), alpha.size());
  if (acc.support_violation) return std::numeric_limits<double>::infinity();
  return acc.h - acc.mass_a + acc.mass_b;
}

double kl_divergence(const Vector& alpha, const Vector& beta) {
  require(alpha.size() == beta.size(), "divergence: shape mismatch");
  Accum acc = accumulate(alpha.data(), beta.data(), alpha.size());
  if (acc.support_violation) return std::numeric_limits<double>::infinity();
  return acc.h - acc.mass_a + acc.mass_b;
}

}  // namespace partnet
