#include "partnet/solvers.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "partnet/divergence.hpp"
#include "partnet/ot.hpp"
#include "partnet/parallel.hpp"
#include "partnet/rng.hpp"

namespace partnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix zeros_like_block(const PartitionedNetwork& P, int i, int j) {
  return Matrix::Zero(P.part_size(i), P.part_size(j));
}

// <A, X> skipping +inf entries of A; X must carry no mass there.
double masked_dot(const Matrix& A, const Matrix& X) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      if (!std::isinf(A(i, j))) s += A(i, j) * X(i, j);
  return s;
}

struct Problem {
  const PartitionedNetwork& P;
  const PartitionedNetwork& Q;
  const LabelCostPair* labels;

  int parts() const { return P.num_parts(); }

  // M[pi_{-i}]: cross-part linear cost for block i.
  Matrix cross_linear_cost(const PartitionedCoupling& cpl, int i) const {
    Matrix M = Matrix::Zero(P.part_size(i), Q.part_size(i));
    for (int j = 0; j < parts(); ++j) {
      if (j == i) continue;
      const Matrix& pj = cpl.blocks[static_cast<size_t>(j)];
      const Matrix* a = P.block(i, j);
      const Matrix* b = Q.block(i, j);
      if (a || b) {
        Matrix za, zb;
        if (!a) { za = zeros_like_block(P, i, j); a = &za; }
        if (!b) { zb = zeros_like_block(Q, i, j); b = &zb; }
        M += 0.5 * apply_distortion_auto(*a, *b, pj);
      }
      a = P.block(j, i);
      b = Q.block(j, i);
      if (a || b) {
        Matrix za, zb;
        if (!a) { za = zeros_like_block(P, j, i); a = &za; }
        if (!b) { zb = zeros_like_block(Q, j, i); b = &zb; }
        M += 0.5 * apply_distortion_auto(a->transpose(), b->transpose(), pj);
      }
    }
    return M;
  }

  // nabla_i L = 1/2 (L(w_ii, w'_ii) + L(w_ii^T, w'_ii^T)) (x) pi_i + M[pi_{-i}] + C_i.
  Matrix block_gradient(const PartitionedCoupling& cpl, int i) const {
    Matrix M = cross_linear_cost(cpl, i);
    const Matrix* a = P.block(i, i);
    const Matrix* b = Q.block(i, i);
    if (a || b) {
      Matrix za, zb;
      if (!a) { za = zeros_like_block(P, i, i); a = &za; }
      if (!b) { zb = zeros_like_block(Q, i, i); b = &zb; }
      const Matrix& pi = cpl.blocks[static_cast<size_t>(i)];
      M += 0.5 * (apply_distortion_auto(*a, *b, pi) +
                  apply_distortion_auto(a->transpose(), b->transpose(), pi));
    }
    if (labels) {
      if (const Matrix* C = labels->block(i)) M += *C;
    }
    return M;
  }

  Matrix label_cost_or_zero(int i) const {
    if (labels) {
      if (const Matrix* C = labels->block(i)) return *C;
    }
    return Matrix::Zero(P.part_size(i), Q.part_size(i));
  }

  ObjectiveBreakdown unregularized(const PartitionedCoupling& cpl) const {
    return objective(P, Q, labels, cpl);
  }
};

// Entropic reference: cost whose Gibbs kernel is e^{-C/eps} mu (x) mu'.
Matrix entropic_ref_cost(const Matrix& C, const Vector& mu, const Vector& mu_p, double eps) {
  Matrix out = C;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      if (std::isinf(out(i, j))) continue;
      if (mu[i] > 0.0 && mu_p[j] > 0.0)
        out(i, j) -= eps * (std::log(mu[i]) + std::log(mu_p[j]));
      else
        out(i, j) = kInf;
    }
  return out;
}

// Cost whose Gibbs kernel at eps = 1 equals base (x) e^{-M/lambda}.
Matrix proximal_kernel_cost(const Matrix& base, const Matrix& M, double lambda) {
  Matrix out(base.rows(), base.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      if (base(i, j) <= 0.0 || std::isinf(M(i, j))) {
        out(i, j) = kInf;
      } else {
        out(i, j) = -std::log(base(i, j)) + M(i, j) / lambda;
      }
    }
  return out;
}

PartitionedCoupling make_init(const Problem& prob, const SolverConfig& config, int restart) {
  const PartitionedNetwork& P = prob.P;
  const PartitionedNetwork& Q = prob.Q;
  InitKind kind = restart == 0 ? config.init : InitKind::random;
  switch (kind) {
    case InitKind::product:
      return product_coupling(P, Q);
    case InitKind::diagonal:
      return diagonal_coupling(P, Q);
    case InitKind::supplied: {
      require(config.supplied_init != nullptr, "supplied init missing");
      PartitionedCoupling cpl = *config.supplied_init;
      cpl.validate(P, Q);
      return cpl;
    }
    case InitKind::random: {
      auto gen = rng::seeded(config.seed, static_cast<uint64_t>(restart));
      PartitionedCoupling cpl = product_coupling(P, Q);
      for (auto& blk : cpl.blocks) {
        for (Eigen::Index a = 0; a < blk.rows(); ++a)
          for (Eigen::Index b = 0; b < blk.cols(); ++b)
            blk(a, b) *= std::exp(config.random_init_noise * rng::normal(gen));
      }
      if (P.mode == Mode::balanced) {
        // KL re-projection onto the transport polytope (cost-free Sinkhorn).
        for (size_t i = 0; i < cpl.blocks.size(); ++i) {
          Matrix C(cpl.blocks[i].rows(), cpl.blocks[i].cols());
          for (Eigen::Index a = 0; a < C.rows(); ++a)
            for (Eigen::Index b = 0; b < C.cols(); ++b) C(a, b) = -std::log(cpl.blocks[i](a, b));
          SinkhornOptions opts;
          opts.max_iter = 50000;
          opts.tol = 1e-12;
          cpl.blocks[i] = sinkhorn(C, P.parts[i].mu, Q.parts[i].mu, 1.0, opts).plan;
        }
      } else {
        double target = std::sqrt(P.part_mass(0) * Q.part_mass(0));
        for (auto& blk : cpl.blocks) blk *= target / blk.sum();
      }
      return cpl;
    }
  }
  throw std::logic_error("unreachable init kind");
}

double coupling_change(const PartitionedCoupling& a, const PartitionedCoupling& b) {
  double d = 0.0;
  for (size_t i = 0; i < a.blocks.size(); ++i)
    d = std::max(d, (a.blocks[i] - b.blocks[i]).cwiseAbs().maxCoeff());
  return d;
}

// Shared outer loop. sweep(t) mutates `couplings`; score() is the
// algorithm's own objective for the trace. The returned coupling is the
// best iterate by unregularized objective (the init counts as an iterate).
struct OuterLoop {
  const Problem& prob;
  const SolverConfig& config;
  PartitionedCoupling couplings;
  std::vector<double> trace;
  PartitionedCoupling best_coupling;
  std::optional<PartitionedCoupling> best_second;
  double best_L = kInf;
  bool converged = false;
  int iterations = 0;

  OuterLoop(const Problem& p, const SolverConfig& c, PartitionedCoupling init)
      : prob(p), config(c), couplings(std::move(init)), best_coupling(couplings) {}

  void consider_best(const PartitionedCoupling* second) {
    double L = prob.unregularized(couplings).total_L;
    if (L < best_L) {
      best_L = L;
      best_coupling = couplings;
      if (second) best_second = *second;
    }
  }

  template <typename Sweep, typename Score>
  void run(Sweep&& sweep, Score&& score, const PartitionedCoupling* second = nullptr) {
    trace.push_back(score());
    consider_best(second);
    for (int t = 0; t < config.max_outer; ++t) {
      PartitionedCoupling previous = couplings;
      sweep(t);
      double obj = score();
      trace.push_back(obj);
      iterations = t + 1;
      consider_best(second);
      bool windowed = false;
      if (trace.size() >= 4) {
        double ref = trace[trace.size() - 4];
        if (std::isfinite(ref) && std::isfinite(obj) &&
            std::abs(obj - ref) <= config.tol * std::max(1.0, std::abs(ref)))
          windowed = true;
      }
      if (windowed || coupling_change(previous, couplings) <= config.tol) {
        converged = true;
        break;
      }
    }
  }

  SolveReport finish(int restart) {
    SolveReport rep;
    rep.coupling = best_coupling;
    rep.coupling.mode = prob.P.mode;
    rep.second_coupling = best_second;
    rep.objective_trace = std::move(trace);
    rep.breakdown = prob.unregularized(best_coupling);
    rep.distance = std::isfinite(rep.breakdown.total_L)
                       ? distance_from_objective(std::max(0.0, rep.breakdown.total_L))
                       : kInf;
    rep.converged = converged;
    rep.iterations = iterations;
    rep.restart_index = restart;
    return rep;
  }
};

void require_balanced(const Problem& prob, const char* who) {
  require(prob.P.mode == Mode::balanced && prob.Q.mode == Mode::balanced,
          std::string(who) + ": balanced mode required");
}

void require_unbalanced(const Problem& prob, const char* who) {
  require(prob.P.mode == Mode::unbalanced && prob.Q.mode == Mode::unbalanced,
          std::string(who) + ": unbalanced mode required");
}

void require_hypernetwork_shape(const Problem& prob, const char* who) {
  require(prob.P.num_parts() == 2 && prob.Q.num_parts() == 2,
          std::string(who) + ": needs 2-partitioned networks");
  for (const PartitionedNetwork* N : {&prob.P, &prob.Q})
    for (int i = 0; i < 2; ++i)
      require(N->block(i, i) == nullptr,
              std::string(who) + ": diagonal kernel blocks present, use a general solver");
}

void check_masked_feasible(const Problem& prob, const PartitionedCoupling& cpl, const char* who) {
  if (!prob.labels) return;
  for (const auto& [i, C] : prob.labels->blocks) {
    const Matrix& pi = cpl.blocks[static_cast<size_t>(i)];
    for (Eigen::Index a = 0; a < C.rows(); ++a)
      for (Eigen::Index b = 0; b < C.cols(); ++b)
        require(!(std::isinf(C(a, b)) && pi(a, b) > 0.0),
                std::string(who) + ": initial coupling puts mass on a masked label cell");
  }
}

using SingleRun = std::function<SolveReport(int restart)>;

SolveReport run_with_restarts(const SolverConfig& config, const SingleRun& single) {
  const int n = std::max(1, config.restarts);
  std::vector<SolveReport> reports(static_cast<size_t>(n));
  parallel_for(n, config.threads, [&](int r) { reports[static_cast<size_t>(r)] = single(r); });
  int best = 0;
  for (int r = 1; r < n; ++r) {
    if (reports[static_cast<size_t>(r)].breakdown.total_L <
        reports[static_cast<size_t>(best)].breakdown.total_L)
      best = r;
  }
  return std::move(reports[static_cast<size_t>(best)]);
}

}  // namespace

double SolverConfig::eps_of(int i) const {
  if (eps.empty()) return 0.0;
  if (eps.size() == 1) return eps[0];
  require(i >= 0 && i < static_cast<int>(eps.size()), "eps vector shorter than part count");
  return eps[static_cast<size_t>(i)];
}

double SolverConfig::prox_lambda(int t) const {
  double v = prox_schedule ? prox_schedule(t) : 0.05;
  require(v > 0.0, "prox schedule must stay positive");
  return v;
}

// ---------------------------------------------------------------------------
// Frank-Wolfe block solve (fused Gromov-Wasserstein subproblem).
// ---------------------------------------------------------------------------

Matrix frank_wolfe_fgw(const Matrix* quad, const Matrix* quad_p, const Matrix& linear_cost,
                       const Vector& mu, const Vector& mu_p, const Matrix& init, int max_iter,
                       double tol) {
  require(init.rows() == mu.size() && init.cols() == mu_p.size(), "frank_wolfe_fgw: init shape");
  double row_gap = (init.rowwise().sum() - mu).cwiseAbs().maxCoeff();
  double col_gap = (init.colwise().sum().transpose() - mu_p).cwiseAbs().maxCoeff();
  require(row_gap <= kDefaultMarginalTol && col_gap <= kDefaultMarginalTol,
          "frank_wolfe_fgw: infeasible init");
  const bool has_quad = quad != nullptr || quad_p != nullptr;
  Matrix zq, zqp;
  if (has_quad) {
    if (!quad) { zq = Matrix::Zero(mu.size(), mu.size()); quad = &zq; }
    if (!quad_p) { zqp = Matrix::Zero(mu_p.size(), mu_p.size()); quad_p = &zqp; }
  }

  Matrix pi = init;
  for (int it = 0; it < max_iter; ++it) {
    Matrix G = linear_cost;
    if (has_quad)
      G += 0.5 * (apply_distortion_auto(*quad, *quad_p, pi) +
                  apply_distortion_auto(quad->transpose(), quad_p->transpose(), pi));
    Matrix s = exact_ot(G, mu, mu_p).plan;
    Matrix delta = s - pi;
    double gap = -masked_dot(G, delta);  // <G, pi - s> >= 0 by LP optimality
    double scale = std::max(1.0, std::abs(masked_dot(linear_cost, pi)));
    if (gap <= tol * scale) break;
    double a = has_quad ? 0.5 * distortion_value(*quad, *quad_p, delta, delta) : 0.0;
    double b = -gap;
    double tau;
    if (a > 0.0) tau = std::min(1.0, std::max(0.0, -b / (2.0 * a)));
    else tau = (a + b < 0.0) ? 1.0 : 0.0;
    if (tau <= 0.0) break;
    pi += tau * delta;
  }
  return pi;
}

// ---------------------------------------------------------------------------
// Algorithm 1 flavour: alternating minimization for (labelled) hypernetworks.
// ---------------------------------------------------------------------------

SolveReport solve_coot(const PartitionedNetwork& H, const PartitionedNetwork& H_p,
                       const LabelCostPair* labels, const SolverConfig& config) {
  Problem prob{H, H_p, labels};
  require_balanced(prob, "solve_coot");
  require_hypernetwork_shape(prob, "solve_coot");
  if (labels) labels->validate(H, H_p);

  auto single = [&](int restart) {
    OuterLoop loop(prob, config, make_init(prob, config, restart));
    std::array<Vector, 2> warm_u, warm_v;
    auto update_part = [&](int i) {
      Matrix cost = prob.cross_linear_cost(loop.couplings, i) + prob.label_cost_or_zero(i);
      const Vector& mu = H.parts[static_cast<size_t>(i)].mu;
      const Vector& mu_p = H_p.parts[static_cast<size_t>(i)].mu;
      double eps = config.eps_of(i);
      if (eps == 0.0) {
        loop.couplings.blocks[static_cast<size_t>(i)] = exact_ot(cost, mu, mu_p).plan;
      } else {
        SinkhornOptions opts;
        opts.max_iter = config.inner_max_iter;
        opts.tol = config.inner_tol;
        if (warm_u[static_cast<size_t>(i)].size() == mu.size() &&
            warm_u[static_cast<size_t>(i)].allFinite())
          opts.warm_u = &warm_u[static_cast<size_t>(i)];
        if (warm_v[static_cast<size_t>(i)].size() == mu_p.size() &&
            warm_v[static_cast<size_t>(i)].allFinite())
          opts.warm_v = &warm_v[static_cast<size_t>(i)];
        OTResult r = sinkhorn(entropic_ref_cost(cost, mu, mu_p, eps), mu, mu_p, eps, opts);
        loop.couplings.blocks[static_cast<size_t>(i)] = r.plan;
        warm_u[static_cast<size_t>(i)] = r.u;
        warm_v[static_cast<size_t>(i)] = r.v;
      }
    };
    loop.run([&](int) { update_part(0); update_part(1); },
             [&]() { return prob.unregularized(loop.couplings).total_L; });
    return loop.finish(restart);
  };
  return run_with_restarts(config, single);
}

// ---------------------------------------------------------------------------
// Algorithm 2: block-coordinate descent with Frank-Wolfe block solves.
// ---------------------------------------------------------------------------

SolveReport solve_bcd(const PartitionedNetwork& P, const PartitionedNetwork& P_p,
                      const LabelCostPair* labels, const SolverConfig& config) {
  Problem prob{P, P_p, labels};
  require_balanced(prob, "solve_bcd");
  if (labels) labels->validate(P, P_p);
  for (int i = 0; i < prob.parts(); ++i)
    require(config.eps_of(i) == 0.0,
            "solve_bcd: exact solver; use solve_projected or solve_proximal for entropic runs");

  auto single = [&](int restart) {
    OuterLoop loop(prob, config, make_init(prob, config, restart));
    check_masked_feasible(prob, loop.couplings, "solve_bcd");
    auto sweep = [&](int) {
      PartitionedCoupling snapshot = loop.couplings;
      const PartitionedCoupling& ref =
          config.sweep == SweepOrder::jacobi ? snapshot : loop.couplings;
      for (int i = 0; i < prob.parts(); ++i) {
        Matrix M = prob.cross_linear_cost(ref, i);
        if (labels) {
          if (const Matrix* C = labels->block(i)) M += *C;
        }
        loop.couplings.blocks[static_cast<size_t>(i)] = frank_wolfe_fgw(
            P.block(i, i), P_p.block(i, i), M, P.parts[static_cast<size_t>(i)].mu,
            P_p.parts[static_cast<size_t>(i)].mu, loop.couplings.blocks[static_cast<size_t>(i)],
            config.max_inner, config.tol);
      }
    };
    loop.run(sweep, [&]() { return prob.unregularized(loop.couplings).total_L; });
    return loop.finish(restart);
  };
  return run_with_restarts(config, single);
}

// ---------------------------------------------------------------------------
// Algorithm 3: entropic proximal gradient.
// ---------------------------------------------------------------------------

SolveReport solve_proximal(const PartitionedNetwork& P, const PartitionedNetwork& P_p,
                           const LabelCostPair* labels, const SolverConfig& config) {
  Problem prob{P, P_p, labels};
  require_balanced(prob, "solve_proximal");
  if (labels) labels->validate(P, P_p);

  auto single = [&](int restart) {
    OuterLoop loop(prob, config, make_init(prob, config, restart));
    std::vector<Vector> warm_u(static_cast<size_t>(prob.parts()));
    std::vector<Vector> warm_v(static_cast<size_t>(prob.parts()));
    auto sweep = [&](int t) {
      double lambda = config.prox_lambda(t);
      PartitionedCoupling snapshot = loop.couplings;
      const PartitionedCoupling& ref =
          config.sweep == SweepOrder::jacobi ? snapshot : loop.couplings;
      for (int i = 0; i < prob.parts(); ++i) {
        Matrix M = prob.block_gradient(ref, i);
        const Matrix& prev = config.sweep == SweepOrder::jacobi
                                 ? snapshot.blocks[static_cast<size_t>(i)]
                                 : loop.couplings.blocks[static_cast<size_t>(i)];
        Matrix cost = proximal_kernel_cost(prev, M, lambda);
        const Vector& mu = P.parts[static_cast<size_t>(i)].mu;
        const Vector& mu_p = P_p.parts[static_cast<size_t>(i)].mu;
        SinkhornOptions opts;
        opts.max_iter = config.inner_max_iter;
        opts.tol = config.inner_tol;
        if (warm_u[static_cast<size_t>(i)].size() == mu.size() &&
            warm_u[static_cast<size_t>(i)].allFinite())
          opts.warm_u = &warm_u[static_cast<size_t>(i)];
        if (warm_v[static_cast<size_t>(i)].size() == mu_p.size() &&
            warm_v[static_cast<size_t>(i)].allFinite())
          opts.warm_v = &warm_v[static_cast<size_t>(i)];
        OTResult r = sinkhorn(cost, mu, mu_p, 1.0, opts);
        loop.couplings.blocks[static_cast<size_t>(i)] = r.plan;
        warm_u[static_cast<size_t>(i)] = r.u;
        warm_v[static_cast<size_t>(i)] = r.v;
      }
    };
    loop.run(sweep, [&]() { return prob.unregularized(loop.couplings).total_L; });
    return loop.finish(restart);
  };
  return run_with_restarts(config, single);
}

// ---------------------------------------------------------------------------
// Algorithm 4: projected mirror descent on the regularized objective.
// ---------------------------------------------------------------------------

SolveReport solve_projected(const PartitionedNetwork& P, const PartitionedNetwork& P_p,
                            const LabelCostPair* labels, const SolverConfig& config) {
  Problem prob{P, P_p, labels};
  require_balanced(prob, "solve_projected");
  if (labels) labels->validate(P, P_p);
  ObjectiveConfig reg;
  for (int i = 0; i < prob.parts(); ++i) {
    double e = config.eps_of(i);
    require(e > 0.0, "solve_projected: eps must be positive for every part");
    reg.eps.push_back(e);
  }

  auto single = [&](int restart) {
    OuterLoop loop(prob, config, make_init(prob, config, restart));
    auto sweep = [&](int) {
      PartitionedCoupling snapshot = loop.couplings;
      const PartitionedCoupling& ref =
          config.sweep == SweepOrder::jacobi ? snapshot : loop.couplings;
      for (int i = 0; i < prob.parts(); ++i) {
        Matrix M = prob.block_gradient(ref, i);
        const Vector& mu = P.parts[static_cast<size_t>(i)].mu;
        const Vector& mu_p = P_p.parts[static_cast<size_t>(i)].mu;
        double eps = config.eps_of(i);
        SinkhornOptions opts;
        opts.max_iter = config.inner_max_iter;
        opts.tol = config.inner_tol;
        loop.couplings.blocks[static_cast<size_t>(i)] =
            sinkhorn(entropic_ref_cost(M, mu, mu_p, eps), mu, mu_p, eps, opts).plan;
      }
    };
    auto score = [&]() {
      ObjectiveBreakdown b = objective(P, P_p, labels, loop.couplings, reg);
      return b.total_L + b.regularizer_sum();
    };
    loop.run(sweep, score);
    return loop.finish(restart);
  };
  return run_with_restarts(config, single);
}

// ---------------------------------------------------------------------------
// Algorithm 5: unbalanced hypernetwork matching.
// ---------------------------------------------------------------------------

namespace {

PartitionedCoupling unbalanced_init(const Problem& prob, const SolverConfig& config, int restart) {
  if (restart == 0 && config.init == InitKind::supplied) {
    require(config.supplied_init != nullptr, "supplied init missing");
    return *config.supplied_init;
  }
  if (restart == 0 && config.init == InitKind::diagonal)
    return diagonal_coupling(prob.P, prob.Q);
  PartitionedCoupling cpl;
  cpl.mode = Mode::unbalanced;
  for (int i = 0; i < prob.parts(); ++i) {
    const Vector& a = prob.P.parts[static_cast<size_t>(i)].mu;
    const Vector& b = prob.Q.parts[static_cast<size_t>(i)].mu;
    cpl.blocks.push_back(a * b.transpose() / std::sqrt(a.sum() * b.sum()));
  }
  if (restart > 0 || config.init == InitKind::random) {
    auto gen = rng::seeded(config.seed, static_cast<uint64_t>(restart));
    for (auto& blk : cpl.blocks) {
      double mass = blk.sum();
      for (Eigen::Index a = 0; a < blk.rows(); ++a)
        for (Eigen::Index b = 0; b < blk.cols(); ++b)
          blk(a, b) *= std::exp(config.random_init_noise * rng::normal(gen));
      blk *= mass / blk.sum();
    }
  }
  return cpl;
}

double uniform_eps(const SolverConfig& config, int parts) {
  double e = config.eps_of(0);
  for (int i = 1; i < parts; ++i)
    require(config.eps_of(i) == e, "unbalanced solvers use a single eps for all parts");
  require(e > 0.0, "unbalanced solvers need eps > 0 (scaling iterations)");
  return e;
}

}  // namespace

SolveReport solve_unbalanced_hypernetwork(const PartitionedNetwork& H,
                                          const PartitionedNetwork& H_p,
                                          const LabelCostPair* labels, const SolverConfig& config) {
  Problem prob{H, H_p, labels};
  require_unbalanced(prob, "solve_unbalanced_hypernetwork");
  require_hypernetwork_shape(prob, "solve_unbalanced_hypernetwork");
  require(config.lambda1 > 0.0 && config.lambda2 > 0.0,
          "solve_unbalanced_hypernetwork: lambda1, lambda2 must be positive");
  if (labels) labels->validate(H, H_p);
  const double eps = uniform_eps(config, 2);
  const double l1 = config.lambda1, l2 = config.lambda2;

  // lambda1 H(pi 1 | mu) + lambda2 H(pi^T 1 | mu') + eps H(pi | mu (x) mu').
  auto marginal_offsets = [&](int j, const Matrix& pj) {
    const Vector& mu = H.parts[static_cast<size_t>(j)].mu;
    const Vector& mu_p = H_p.parts[static_cast<size_t>(j)].mu;
    Vector row = pj.rowwise().sum(), col = pj.colwise().sum().transpose();
    Matrix ref = mu * mu_p.transpose();
    return l1 * relative_entropy(row, mu) + l2 * relative_entropy(col, mu_p) +
           eps * relative_entropy(pj, ref);
  };

  auto score = [&](const PartitionedCoupling& cpl) {
    double v = 0.5 * prob.unregularized(cpl).quadratic_sum();
    double m0 = cpl.blocks[0].sum(), m1 = cpl.blocks[1].sum();
    if (labels) {
      if (const Matrix* C = labels->block(0)) v += m0 * masked_dot(*C, cpl.blocks[0]);
      if (const Matrix* C = labels->block(1)) v += m1 * masked_dot(*C, cpl.blocks[1]);
    }
    v += m1 * marginal_offsets(0, cpl.blocks[0]) + m0 * marginal_offsets(1, cpl.blocks[1]);
    v -= (l1 + l2 + eps) * m0 * m1;
    return v;
  };

  auto single = [&](int restart) {
    OuterLoop loop(prob, config, unbalanced_init(prob, config, restart));
    auto update = [&](int i) {
      int j = 1 - i;
      const Matrix& pj = loop.couplings.blocks[static_cast<size_t>(j)];
      double mj = pj.sum();
      Matrix M = prob.cross_linear_cost(loop.couplings, i);
      if (labels) {
        if (const Matrix* C = labels->block(i)) M += mj * *C;
        if (const Matrix* Cj = labels->block(j)) M.array() += masked_dot(*Cj, pj);
      }
      M.array() += marginal_offsets(j, pj);
      Matrix pi = unbalanced_sinkhorn(M, H.parts[static_cast<size_t>(i)].mu,
                                      H_p.parts[static_cast<size_t>(i)].mu, eps * mj, l1 * mj,
                                      l2 * mj, config.inner_max_iter, config.inner_tol)
                      .plan;
      double mi = pi.sum();
      require(mi > 0.0, "solve_unbalanced_hypernetwork: coupling collapsed to zero mass");
      // Joint KL projection onto {m(pi_1) = m(pi_2)}: both blocks land on the
      // geometric mean, so the masses agree exactly after every rescale.
      double r = std::sqrt(mj / mi);
      loop.couplings.blocks[static_cast<size_t>(i)] = r * pi;
      loop.couplings.blocks[static_cast<size_t>(j)] = pj / r;
    };
    loop.run([&](int) { update(0); update(1); }, [&]() { return score(loop.couplings); });
    return loop.finish(restart);
  };
  return run_with_restarts(config, single);
}

// ---------------------------------------------------------------------------
// Algorithm 6: biconvex relaxation for unbalanced partitioned networks.
// ---------------------------------------------------------------------------

SolveReport solve_unbalanced_partitioned(const PartitionedNetwork& P,
                                         const PartitionedNetwork& P_p,
                                         const LabelCostPair* labels, const SolverConfig& config) {
  Problem prob{P, P_p, labels};
  require_unbalanced(prob, "solve_unbalanced_partitioned");
  require(config.lambda1 > 0.0 && config.lambda2 > 0.0,
          "solve_unbalanced_partitioned: lambda1, lambda2 must be positive");
  if (labels) labels->validate(P, P_p);
  const int k = prob.parts();
  const double eps = uniform_eps(config, k);
  const double l1 = config.lambda1, l2 = config.lambda2;

  auto entropy_sum = [&](const PartitionedCoupling& cpl) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) {
      const Matrix& pj = cpl.blocks[static_cast<size_t>(j)];
      const Vector& mu = P.parts[static_cast<size_t>(j)].mu;
      const Vector& mu_p = P_p.parts[static_cast<size_t>(j)].mu;
      Vector row = pj.rowwise().sum(), col = pj.colwise().sum().transpose();
      Matrix ref = mu * mu_p.transpose();
      s += eps * relative_entropy(pj, ref) + l1 * relative_entropy(row, mu) +
           l2 * relative_entropy(col, mu_p);
    }
    return s;
  };

  // 1/2 sum_j L(w_ij, w'_ij) (x) other_j, transposed for the xi family.
  auto half_quad_cost = [&](const PartitionedCoupling& other, int i, bool transposed) {
    Matrix M = Matrix::Zero(P.part_size(i), P_p.part_size(i));
    for (int j = 0; j < k; ++j) {
      const Matrix* a = transposed ? P.block(j, i) : P.block(i, j);
      const Matrix* b = transposed ? P_p.block(j, i) : P_p.block(i, j);
      if (!a && !b) continue;
      Matrix za, zb;
      if (!a) { za = transposed ? zeros_like_block(P, j, i) : zeros_like_block(P, i, j); a = &za; }
      if (!b) {
        zb = transposed ? zeros_like_block(P_p, j, i) : zeros_like_block(P_p, i, j);
        b = &zb;
      }
      const Matrix& oj = other.blocks[static_cast<size_t>(j)];
      if (transposed) M += 0.5 * apply_distortion_auto(a->transpose(), b->transpose(), oj);
      else M += 0.5 * apply_distortion_auto(*a, *b, oj);
    }
    return M;
  };

  auto relaxed_quad = [&](const PartitionedCoupling& pi, const PartitionedCoupling& xi) {
    double s = 0.0;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        const Matrix* a = P.block(i, j);
        const Matrix* b = P_p.block(i, j);
        if (!a && !b) continue;
        Matrix za, zb;
        if (!a) { za = zeros_like_block(P, i, j); a = &za; }
        if (!b) { zb = zeros_like_block(P_p, i, j); b = &zb; }
        s += distortion_value(*a, *b, pi.blocks[static_cast<size_t>(i)],
                              xi.blocks[static_cast<size_t>(j)]);
      }
    return 0.5 * s;
  };

  auto score = [&](const PartitionedCoupling& pi, const PartitionedCoupling& xi) {
    double v = relaxed_quad(pi, xi);
    if (labels) {
      for (const auto& [i, C] : labels->blocks) {
        v += 0.5 * (masked_dot(C, pi.blocks[static_cast<size_t>(i)]) *
                        xi.blocks[static_cast<size_t>(i)].sum() +
                    pi.blocks[static_cast<size_t>(i)].sum() *
                        masked_dot(C, xi.blocks[static_cast<size_t>(i)]));
      }
    }
    // KL of product couplings via the 2-homogeneous identity.
    auto prod_kl = [](double kl_a, double kl_b, double ma, double mra, double mb, double mrb) {
      return mb * kl_a + ma * kl_b + (ma - mra) * (mb - mrb);
    };
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        const Matrix& a = pi.blocks[static_cast<size_t>(i)];
        const Matrix& b = xi.blocks[static_cast<size_t>(j)];
        Matrix ra =
            P.parts[static_cast<size_t>(i)].mu * P_p.parts[static_cast<size_t>(i)].mu.transpose();
        Matrix rb =
            P.parts[static_cast<size_t>(j)].mu * P_p.parts[static_cast<size_t>(j)].mu.transpose();
        v += eps *
             prod_kl(kl_divergence(a, ra), kl_divergence(b, rb), a.sum(), ra.sum(), b.sum(), rb.sum());
        Vector rowa = a.rowwise().sum(), rowb = b.rowwise().sum();
        Vector cola = a.colwise().sum().transpose(), colb = b.colwise().sum().transpose();
        v += l1 * prod_kl(kl_divergence(rowa, P.parts[static_cast<size_t>(i)].mu),
                          kl_divergence(rowb, P.parts[static_cast<size_t>(j)].mu), rowa.sum(),
                          P.part_mass(i), rowb.sum(), P.part_mass(j));
        v += l2 * prod_kl(kl_divergence(cola, P_p.parts[static_cast<size_t>(i)].mu),
                          kl_divergence(colb, P_p.parts[static_cast<size_t>(j)].mu), cola.sum(),
                          P_p.part_mass(i), colb.sum(), P_p.part_mass(j));
      }
    return v;
  };

  auto mass_project = [&](PartitionedCoupling& cpl) {
    double log_geo = 0.0;
    for (const auto& blk : cpl.blocks) log_geo += std::log(blk.sum());
    double geo = std::exp(log_geo / k);
    for (auto& blk : cpl.blocks) blk *= geo / blk.sum();
  };

  auto single = [&](int restart) {
    PartitionedCoupling init = unbalanced_init(prob, config, restart);
    PartitionedCoupling xi = init;
    OuterLoop loop(prob, config, std::move(init));
    auto family_update = [&](PartitionedCoupling& target, const PartitionedCoupling& other,
                             bool transposed) {
      double sm = 0.0;
      for (const auto& blk : other.blocks) sm += blk.sum();
      double offset = entropy_sum(other);
      for (int i = 0; i < k; ++i) {
        Matrix M = half_quad_cost(other, i, transposed);
        if (labels) {
          if (const Matrix* C = labels->block(i)) {
            M += 0.5 * other.blocks[static_cast<size_t>(i)].sum() * *C;
            M.array() += 0.5 * masked_dot(*C, other.blocks[static_cast<size_t>(i)]);
          }
        }
        M.array() += offset;
        target.blocks[static_cast<size_t>(i)] =
            unbalanced_sinkhorn(M, P.parts[static_cast<size_t>(i)].mu,
                                P_p.parts[static_cast<size_t>(i)].mu, eps * sm, l1 * sm, l2 * sm,
                                config.inner_max_iter, config.inner_tol)
                .plan;
      }
      mass_project(target);
    };
    auto sweep = [&](int) {
      family_update(loop.couplings, xi, /*transposed=*/false);
      family_update(xi, loop.couplings, /*transposed=*/true);
      double mp = loop.couplings.blocks[0].sum(), mx = xi.blocks[0].sum();
      double r = std::sqrt(mx / mp);
      for (auto& blk : loop.couplings.blocks) blk *= r;
      for (auto& blk : xi.blocks) blk /= r;
    };
    loop.run(sweep, [&]() { return score(loop.couplings, xi); }, &xi);
    SolveReport rep = loop.finish(restart);
    if (!rep.second_coupling) rep.second_coupling = xi;
    rep.second_coupling->mode = Mode::unbalanced;
    double gap = 0.0;
    for (int i = 0; i < k; ++i)
      gap = std::max(gap, (rep.coupling.blocks[static_cast<size_t>(i)] -
                           rep.second_coupling->blocks[static_cast<size_t>(i)])
                              .cwiseAbs()
                              .maxCoeff());
    rep.coupling_gap = gap;
    return rep;
  };
  return run_with_restarts(config, single);
}

// ---------------------------------------------------------------------------
// Multiscale chains.
// ---------------------------------------------------------------------------

PartitionedNetwork chain_to_network(const std::vector<ChainLevel>& chain) {
  require(!chain.empty(), "chain must have at least one level");
  PartitionedNetwork P;
  P.mode = Mode::balanced;
  for (size_t i = 0; i < chain.size(); ++i)
    P.parts.push_back({"level" + std::to_string(i), chain[i].mu.size(), chain[i].mu});
  for (size_t i = 0; i < chain.size(); ++i) {
    if (chain[i].within) P.set_block(static_cast<int>(i), static_cast<int>(i), *chain[i].within);
    if (chain[i].incidence_down) {
      require(i + 1 < chain.size(), "chain incidence on the last level has no target");
      require(chain[i].incidence_down->rows() == chain[i].mu.size() &&
                  chain[i].incidence_down->cols() == chain[i + 1].mu.size(),
              "chain incidence shape mismatch");
      P.set_block(static_cast<int>(i), static_cast<int>(i) + 1, *chain[i].incidence_down);
      P.set_block(static_cast<int>(i) + 1, static_cast<int>(i),
                  chain[i].incidence_down->transpose());
    }
  }
  P.validate();
  return P;
}

SolveReport solve_multiscale(const std::vector<ChainLevel>& chain,
                             const std::vector<ChainLevel>& chain_p, const SolverConfig& config) {
  require(chain.size() == chain_p.size(), "solve_multiscale: chains must have equal depth");
  PartitionedNetwork P = chain_to_network(chain);
  PartitionedNetwork Q = chain_to_network(chain_p);
  bool entropic = false;
  for (int i = 0; i < P.num_parts(); ++i)
    if (config.eps_of(i) > 0.0) entropic = true;
  if (entropic) return solve_projected(P, Q, nullptr, config);
  return solve_bcd(P, Q, nullptr, config);
}

// ---------------------------------------------------------------------------
// Dispatcher.
// ---------------------------------------------------------------------------

SolveReport solve(const PartitionedNetwork& P, const PartitionedNetwork& P_p,
                  const LabelCostPair* labels, const SolverConfig& config) {
  switch (config.algorithm) {
    case Algorithm::coot: return solve_coot(P, P_p, labels, config);
    case Algorithm::bcd: return solve_bcd(P, P_p, labels, config);
    case Algorithm::proximal: return solve_proximal(P, P_p, labels, config);
    case Algorithm::projected: return solve_projected(P, P_p, labels, config);
    case Algorithm::unbalanced_hyper: return solve_unbalanced_hypernetwork(P, P_p, labels, config);
    case Algorithm::unbalanced_partitioned:
      return solve_unbalanced_partitioned(P, P_p, labels, config);
    case Algorithm::multiscale:
      throw std::invalid_argument("multiscale expects chain inputs; call solve_multiscale");
  }
  throw std::logic_error("unknown algorithm");
}

// ---------------------------------------------------------------------------
// EigenAlign baseline.
// ---------------------------------------------------------------------------

EigenAlignResult eigen_align(const Matrix& G, const Matrix& G_p, double eta) {
  require(eta > 0.0, "eigen_align: eta must be positive");
  for (const Matrix* M : {&G, &G_p})
    for (Eigen::Index i = 0; i < M->rows(); ++i)
      for (Eigen::Index j = 0; j < M->cols(); ++j)
        require((*M)(i, j) == 0.0 || (*M)(i, j) == 1.0, "eigen_align: adjacency must be binary");
  require(G.rows() == G.cols() && G_p.rows() == G_p.cols(),
          "eigen_align: adjacency matrices must be square");

  const Eigen::Index n = G.rows(), m = G_p.rows();
  // Shifted distortion scores s1 = s2 = 1/2 + eta, s3 = eta give the operator
  //   A = G (x) G' - 1/2 (G (x) 1 + 1 (x) G') + (1/2 + eta) 1 (x) 1,
  // applied to |V| x |V'| iterates without materializing A.
  auto apply = [&](const Matrix& X) {
    Vector r = X.rowwise().sum();
    Vector c = X.colwise().sum().transpose();
    double total = X.sum();
    Matrix Y = G * X * G_p.transpose();
    Vector gr = G * r;
    Vector gc = G_p * c;
    Y.colwise() -= 0.5 * gr;
    Y.rowwise() -= 0.5 * gc.transpose();
    Y.array() += (0.5 + eta) * total;
    return Y;
  };

  Matrix x = Matrix::Constant(n, m, 1.0 / std::sqrt(static_cast<double>(n * m)));
  EigenAlignResult out;
  for (int it = 0; it < 1000; ++it) {
    Matrix y = apply(x);
    double norm = y.norm();
    require(norm > 0.0, "eigen_align: operator annihilated the iterate");
    y /= norm;
    double resid = (y - x).cwiseAbs().maxCoeff();
    x = y;
    out.iterations = it + 1;
    if (resid <= 1e-10) break;
  }
  out.eigenvector = x;
  out.assignment = round_to_permutation(x.cwiseMax(0.0));
  out.score = out.assignment.value;
  out.distortion = assignment_distortion(G, G_p, out.assignment);
  return out;
}

double assignment_distortion(const Matrix& G, const Matrix& G_p, const Assignment& assignment) {
  const Eigen::Index n = G.rows();
  Matrix pi = Matrix::Zero(n, G_p.rows());
  for (Eigen::Index r = 0; r < n; ++r) {
    int c = assignment.col_of_row[static_cast<size_t>(r)];
    if (c >= 0) pi(r, c) = 1.0 / static_cast<double>(n);
  }
  return 0.5 * distortion_value(G, G_p, pi, pi);
}

}  // namespace partnet
