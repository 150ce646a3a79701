#pragma once

#include "partnet/types.hpp"

namespace partnet {

// Generalized Kullback-Leibler divergence between nonnegative measures,
//   KL(a|b) = <a, log(da/db)> - |a| + |b|,
// with 0 log 0 := 0 and +inf returned when a puts mass where b vanishes.
double kl_divergence(const Matrix& alpha, const Matrix& beta);
double kl_divergence(const Vector& alpha, const Vector& beta);

// Relative entropy H(a|b) = <a, log(da/db)>. May be negative.
double relative_entropy(const Matrix& alpha, const Matrix& beta);
double relative_entropy(const Vector& alpha, const Vector& beta);

}  // namespace partnet
