#pragma once

#include <functional>
#include <optional>

#include "partnet/assignment.hpp"
#include "partnet/distortion.hpp"
#include "partnet/types.hpp"

namespace partnet {

enum class Algorithm {
  coot,
  bcd,
  proximal,
  projected,
  unbalanced_hyper,
  unbalanced_partitioned,
  multiscale,
};

enum class InitKind { product, diagonal, random, supplied };

// Block update order. Gauss-Seidel (fresh couplings inside a sweep) is the
// default and is what makes the descent traces monotone; jacobi evaluates a
// whole sweep at the previous iterate.
enum class SweepOrder { gauss_seidel, jacobi };

struct SolverConfig {
  Algorithm algorithm = Algorithm::bcd;
  std::vector<double> eps;  // per part; empty = 0, single entry broadcasts
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  std::function<double(int)> prox_schedule;  // t -> lambda^t, default constant 0.05
  int max_outer = 1000;
  int max_inner = 200;
  double tol = 1e-9;
  uint64_t seed = 0;
  int restarts = 1;
  InitKind init = InitKind::product;
  const PartitionedCoupling* supplied_init = nullptr;
  SweepOrder sweep = SweepOrder::gauss_seidel;
  int threads = 1;
  // Inner scaling solves are warm started, so a modest cap per outer step
  // is enough; the marginal quality of returned couplings stays ~1e-12.
  double inner_tol = 1e-9;
  int inner_max_iter = 300;
  double random_init_noise = 1.0;  // log-normal sigma for restart inits

  double eps_of(int i) const;
  double prox_lambda(int t) const;
};

struct SolveReport {
  PartitionedCoupling coupling;
  std::optional<PartitionedCoupling> second_coupling;  // xi family (biconvex relaxation)
  std::vector<double> objective_trace;  // the algorithm's own objective, starting at the init
  ObjectiveBreakdown breakdown;         // unregularized, for the returned coupling
  double distance = 0.0;                // sqrt(total_L) of the breakdown
  bool converged = false;
  int iterations = 0;
  int restart_index = 0;
  double coupling_gap = 0.0;  // max_i ||pi_i - xi_i||_inf, biconvex diagnostic
};

// Algorithm 1 style alternating minimization for hypernetwork pairs
// (2 parts, off-diagonal kernel only). Inner solves are exact when eps_i = 0
// and entropic otherwise.
SolveReport solve_coot(const PartitionedNetwork& H, const PartitionedNetwork& H_p,
                       const LabelCostPair* labels, const SolverConfig& config);

// Block-coordinate descent over parts; each block is a fused
// Gromov-Wasserstein problem handled by Frank-Wolfe. Exact (eps = 0) only.
SolveReport solve_bcd(const PartitionedNetwork& P, const PartitionedNetwork& P_p,
                      const LabelCostPair* labels, const SolverConfig& config);

// One Frank-Wolfe block solve: quadratic part from an optional kernel pair,
// linear part M (may contain +inf masks), marginals fixed.
Matrix frank_wolfe_fgw(const Matrix* quad, const Matrix* quad_p, const Matrix& linear_cost,
                       const Vector& mu, const Vector& mu_p, const Matrix& init, int max_iter,
                       double tol);

// Entropic proximal gradient (proximal point when all diagonal blocks are
// absent); step schedule lambda^t from the config.
SolveReport solve_proximal(const PartitionedNetwork& P, const PartitionedNetwork& P_p,
                           const LabelCostPair* labels, const SolverConfig& config);

// Projected mirror descent on the entropically regularized objective;
// requires eps_i > 0 for every part.
SolveReport solve_projected(const PartitionedNetwork& P, const PartitionedNetwork& P_p,
                            const LabelCostPair* labels, const SolverConfig& config);

// Unbalanced hypernetwork matching (alternating scaling solves with the
// sqrt mass rescale after each block).
SolveReport solve_unbalanced_hypernetwork(const PartitionedNetwork& H,
                                          const PartitionedNetwork& H_p,
                                          const LabelCostPair* labels, const SolverConfig& config);

// Biconvex relaxation with two coupling families and geometric-mean mass
// projection; the report carries both families and their gap.
SolveReport solve_unbalanced_partitioned(const PartitionedNetwork& P,
                                         const PartitionedNetwork& P_p,
                                         const LabelCostPair* labels, const SolverConfig& config);

// Multiscale chains: per-level weights, optional within-level kernels and
// cross-level incidences. Solved as the chain-structured partitioned network.
struct ChainLevel {
  Vector mu;
  std::optional<Matrix> within;         // n_i x n_i
  std::optional<Matrix> incidence_down; // n_i x n_{i+1}; absent on the last level
};

PartitionedNetwork chain_to_network(const std::vector<ChainLevel>& chain);

SolveReport solve_multiscale(const std::vector<ChainLevel>& chain,
                             const std::vector<ChainLevel>& chain_p, const SolverConfig& config);

// Generic dispatcher used by the CLI.
SolveReport solve(const PartitionedNetwork& P, const PartitionedNetwork& P_p,
                  const LabelCostPair* labels, const SolverConfig& config);

struct EigenAlignResult {
  Assignment assignment;
  double score = 0.0;       // relaxed eigenvector mass picked up by the assignment
  double distortion = 0.0;  // GW distortion of the hard assignment
  Matrix eigenvector;       // Perron vector reshaped to |V| x |V'|
  int iterations = 0;
};

// Spectral alignment baseline: power iteration on the shifted match-score
// operator (never materialized), then a linear assignment rounding.
EigenAlignResult eigen_align(const Matrix& G, const Matrix& G_p, double eta = 1e-3);

// GW distortion of a hard assignment between binary adjacency matrices,
// under uniform node weights on the source.
double assignment_distortion(const Matrix& G, const Matrix& G_p, const Assignment& assignment);

}  // namespace partnet
