#pragma once

#include <optional>

#include "partnet/types.hpp"

namespace partnet {

// Contraction of the 4-way distortion tensor L(omega, omega')_{ijkl} =
// 1/2 |omega_{ik} - omega'_{jl}|^2 against pi over (k,l):
//   L(omega, omega') (x) pi = eta(omega, omega') - omega pi omega'^T,
//   eta = 1/2 (omega^2) mu 1^T + 1/2 1 (omega'^2 mu')^T,
// with mu, mu' used literally (they are pi's marginals when pi is a
// coupling, but the formula accepts anything of the right length).
Matrix apply_distortion(const Matrix& omega, const Matrix& omega_p, const Matrix& pi,
                        const Vector& mu, const Vector& mu_p);

// Same contraction with mu, mu' taken as pi's actual marginals. Valid for
// arbitrary nonnegative-or-signed pi (used for Frank-Wolfe directions).
Matrix apply_distortion_auto(const Matrix& omega, const Matrix& omega_p, const Matrix& pi);

// <L(omega, omega'), pi_i (x) pi_j> = 1/2 ||omega - omega'||^2_{L2(pi_i (x) pi_j)}.
double distortion_value(const Matrix& omega, const Matrix& omega_p, const Matrix& pi_i,
                        const Matrix& pi_j);

struct ObjectiveConfig {
  // Entropic levels used only for regularizer accounting, eps_i * KL(pi_i | mu_i (x) mu'_i).
  std::vector<double> eps;
};

// Full decomposition of the matching objective
//   L(pi) = 1/2 sum_ij <L(w_ij, w'_ij), pi_i (x) pi_j> + sum_i <C_i, pi_i>.
// Mass on an inf-masked label cell makes the objective +inf.
ObjectiveBreakdown objective(const PartitionedNetwork& P, const PartitionedNetwork& P_p,
                             const LabelCostPair* labels, const PartitionedCoupling& coupling,
                             const ObjectiveConfig& config = {});

// d = sqrt(L) for the p = 2 convention above: with couplings fixed,
// 4 d^2 = sum_ij ||w - w'||^2 = 4 * (1/2 sum_ij <L_ij, .>), so d^2 = L.
double distance_from_objective(double total_L_unregularized);

// Evaluation (not optimization) of the p-cost of a given coupling.
// p < inf : 1/2 (sum_ij ||w - w'||^p_{Lp(pi_i (x) pi_j)})^{1/p};
// p = inf : 1/2 max_ij ess-sup over supp(pi_i (x) pi_j).
double evaluate_distance_p(const PartitionedNetwork& P, const PartitionedNetwork& P_p,
                           const PartitionedCoupling& coupling, double p);

inline constexpr double kInfiniteP = std::numeric_limits<double>::infinity();

}  // namespace partnet
