#pragma once

#include <optional>

#include "partnet/types.hpp"

namespace partnet {

struct OTResult {
  Matrix plan;
  double cost = 0.0;  // <C, plan>, masked cells excluded (they carry no mass)
  int iterations = 0;
  double marginal_violation = 0.0;
  bool converged = true;
  // Scaling vectors for warm starts (sinkhorn family): plan = diag(u) K diag(v).
  Vector u, v;
};

// Exact linear program min <C, pi> over Pi(mu, mu'). Entries of C may be
// +inf (forbidden cells). Transportation simplex, north-west-corner start,
// Bland's rule, lexicographic tie-breaks.
OTResult exact_ot(const Matrix& C, const Vector& mu, const Vector& mu_p);

struct SinkhornOptions {
  int max_iter = 10000;
  double tol = 1e-9;
  const Vector* warm_u = nullptr;
  const Vector* warm_v = nullptr;
};

// KL projection of exp(-C/eps) * mu (x) mu' onto Pi(mu, mu') by alternating
// scaling. Switches to log-domain automatically once scalings pass e^{+-30}.
OTResult sinkhorn(const Matrix& C, const Vector& mu, const Vector& mu_p, double eps,
                  const SinkhornOptions& opts = {});

// min <C, pi> + rho1 KL(pi 1 | mu) + rho2 KL(pi^T 1 | mu') + eps KL(pi | mu (x) mu')
// over nonnegative pi; scaling updates with exponents rho/(rho+eps).
OTResult unbalanced_sinkhorn(const Matrix& C, const Vector& mu, const Vector& mu_p, double eps,
                             double rho1, double rho2, int max_iter = 10000, double tol = 1e-10);

// Euclidean projection onto the probability simplex (sort and threshold).
Vector simplex_project(const Vector& v);

}  // namespace partnet
