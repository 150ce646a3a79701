#include "partnet/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace partnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ----------------------------------------------------------------------
// Transportation simplex.
//
// Basis arcs form a spanning tree on the bipartite row/column node graph.
// Forbidden (masked) cells are variables fixed at zero: phase 1 drives any
// mass off them, phase 2 never lets them re-enter, and a cycle through a
// masked basic arc forces a degenerate pivot that ejects it.
// ----------------------------------------------------------------------

struct Simplex {
  int n, m;
  const Matrix& cost;        // surrogate 0 used for masked basic arcs
  const std::vector<char>& masked;
  Matrix plan;
  std::vector<char> basic;   // n*m flags
  std::vector<std::pair<int, int>> tree_arcs;
  int pivots = 0;

  Simplex(const Matrix& c, const std::vector<char>& msk, int rows, int cols)
      : n(rows), m(cols), cost(c), masked(msk), plan(Matrix::Zero(rows, cols)),
        basic(static_cast<size_t>(rows) * static_cast<size_t>(cols), 0) {}

  int idx(int i, int j) const { return i * m + j; }
  bool is_masked(int i, int j) const { return masked[static_cast<size_t>(idx(i, j))] != 0; }

  void northwest_init(Vector a, Vector b) {
    int i = 0, j = 0;
    while (true) {
      double t = std::min(a[i], b[j]);
      plan(i, j) = t;
      basic[static_cast<size_t>(idx(i, j))] = 1;
      a[i] -= t;
      b[j] -= t;
      if (i == n - 1 && j == m - 1) break;
      if (a[i] <= b[j] && i < n - 1) ++i;
      else if (j < m - 1) ++j;
      else ++i;
    }
  }

  double arc_cost(int i, int j, bool phase1) const {
    if (phase1) return is_masked(i, j) ? 1.0 : 0.0;
    return is_masked(i, j) ? 0.0 : cost(i, j);
  }

  // Duals from the spanning tree (root: row 0, u = 0).
  void compute_duals(std::vector<double>& u, std::vector<double>& v, bool phase1) const {
    u.assign(static_cast<size_t>(n), std::numeric_limits<double>::quiet_NaN());
    v.assign(static_cast<size_t>(m), std::numeric_limits<double>::quiet_NaN());
    std::vector<std::vector<int>> row_arcs(static_cast<size_t>(n)), col_arcs(static_cast<size_t>(m));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        if (basic[static_cast<size_t>(idx(i, j))]) {
          row_arcs[static_cast<size_t>(i)].push_back(j);
          col_arcs[static_cast<size_t>(j)].push_back(i);
        }
    std::vector<int> stack = {0};  // encoded: row r -> r, col c -> n + c
    u[0] = 0.0;
    while (!stack.empty()) {
      int node = stack.back();
      stack.pop_back();
      if (node < n) {
        for (int j : row_arcs[static_cast<size_t>(node)]) {
          if (std::isnan(v[static_cast<size_t>(j)])) {
            v[static_cast<size_t>(j)] = arc_cost(node, j, phase1) - u[static_cast<size_t>(node)];
            stack.push_back(n + j);
          }
        }
      } else {
        int j = node - n;
        for (int i : col_arcs[static_cast<size_t>(j)]) {
          if (std::isnan(u[static_cast<size_t>(i)])) {
            u[static_cast<size_t>(i)] = arc_cost(i, j, phase1) - v[static_cast<size_t>(j)];
            stack.push_back(i);
          }
        }
      }
    }
  }

  // Unique cycle created by adding (ei, ej): tree path from col ej back to
  // row ei, alternating +/- starting at the entering arc.
  std::vector<std::pair<int, int>> find_cycle(int ei, int ej) const {
    std::vector<std::vector<int>> adj(static_cast<size_t>(n + m));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        if (basic[static_cast<size_t>(idx(i, j))]) {
          adj[static_cast<size_t>(i)].push_back(n + j);
          adj[static_cast<size_t>(n + j)].push_back(i);
        }
    std::vector<int> parent(static_cast<size_t>(n + m), -2);
    std::vector<int> stack = {ei};
    parent[static_cast<size_t>(ei)] = -1;
    while (!stack.empty()) {
      int node = stack.back();
      stack.pop_back();
      if (node == n + ej) break;
      for (int nxt : adj[static_cast<size_t>(node)]) {
        if (parent[static_cast<size_t>(nxt)] == -2) {
          parent[static_cast<size_t>(nxt)] = node;
          stack.push_back(nxt);
        }
      }
    }
    std::vector<int> path;  // nodes from ei to n+ej
    for (int node = n + ej; node != -1; node = parent[static_cast<size_t>(node)]) path.push_back(node);
    std::reverse(path.begin(), path.end());
    std::vector<std::pair<int, int>> cycle;  // alternating arcs, first is entering (+)
    cycle.emplace_back(ei, ej);
    for (size_t t = 0; t + 1 < path.size(); ++t) {
      int a = path[t], b = path[t + 1];
      int i = a < n ? a : b;
      int j = a < n ? b - n : a - n;
      cycle.emplace_back(i, j);
    }
    return cycle;
  }

  // One Bland pivot. Returns false when optimal.
  bool pivot(bool phase1, double enter_tol) {
    std::vector<double> u, v;
    compute_duals(u, v, phase1);
    int ei = -1, ej = -1;
    for (int i = 0; i < n && ei < 0; ++i)
      for (int j = 0; j < m; ++j) {
        if (basic[static_cast<size_t>(idx(i, j))]) continue;
        if (!phase1 && is_masked(i, j)) continue;
        double r = arc_cost(i, j, phase1) - u[static_cast<size_t>(i)] - v[static_cast<size_t>(j)];
        if (r < -enter_tol) {
          ei = i;
          ej = j;
          break;
        }
      }
    if (ei < 0) return false;

    auto cycle = find_cycle(ei, ej);
    // Even positions gain theta, odd positions lose it. A masked basic arc
    // on the gaining side pins theta at zero.
    auto limit_of = [&](size_t t) -> double {
      auto [i, j] = cycle[t];
      if (t % 2 == 1) return plan(i, j);
      if (t > 0 && !phase1 && is_masked(i, j)) return 0.0;
      return kInf;
    };
    double theta = kInf;
    for (size_t t = 1; t < cycle.size(); ++t) theta = std::min(theta, limit_of(t));
    require(theta < kInf, "transportation simplex: unbounded pivot");
    int leave = -1;
    for (size_t t = 1; t < cycle.size(); ++t) {
      if (limit_of(t) > theta + 1e-15) continue;
      if (leave < 0 || cycle[t] < cycle[static_cast<size_t>(leave)]) leave = static_cast<int>(t);
    }
    for (size_t t = 0; t < cycle.size(); ++t) {
      auto [i, j] = cycle[t];
      plan(i, j) += (t % 2 == 0 ? theta : -theta);
    }
    auto [li, lj] = cycle[static_cast<size_t>(leave)];
    plan(li, lj) = 0.0;
    basic[static_cast<size_t>(idx(li, lj))] = 0;
    basic[static_cast<size_t>(idx(ei, ej))] = 1;
    ++pivots;
    return true;
  }

  void run(bool phase1, double enter_tol) {
    const int cap = 2000 + 60 * n * m;
    int count = 0;
    while (pivot(phase1, enter_tol)) {
      if (++count > cap) throw std::runtime_error("transportation simplex: pivot limit exceeded");
    }
  }
};

}  // namespace

OTResult exact_ot(const Matrix& C, const Vector& mu, const Vector& mu_p) {
  const int n_full = static_cast<int>(mu.size());
  const int m_full = static_cast<int>(mu_p.size());
  require(C.rows() == n_full && C.cols() == m_full, "exact_ot: shape mismatch");
  require((mu.array() >= 0.0).all() && (mu_p.array() >= 0.0).all(), "exact_ot: negative marginals");
  require(std::abs(mu.sum() - mu_p.sum()) <= 1e-10 * std::max(1.0, mu.sum()),
          "exact_ot: marginals must carry equal mass");
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    for (Eigen::Index j = 0; j < C.cols(); ++j)
      require(!std::isnan(C(i, j)) && C(i, j) > -kInf, "exact_ot: cost entries must not be NaN/-inf");

  // Zero-mass rows and columns are solved away and reinserted as zeros.
  std::vector<int> rows, cols;
  for (int i = 0; i < n_full; ++i)
    if (mu[i] > 0.0) rows.push_back(i);
  for (int j = 0; j < m_full; ++j)
    if (mu_p[j] > 0.0) cols.push_back(j);

  OTResult out;
  out.plan = Matrix::Zero(n_full, m_full);
  if (rows.empty() || cols.empty()) return out;

  const int n = static_cast<int>(rows.size());
  const int m = static_cast<int>(cols.size());
  Matrix cost(n, m);
  std::vector<char> masked(static_cast<size_t>(n) * static_cast<size_t>(m), 0);
  bool any_masked = false;
  double cmax = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double c = C(rows[static_cast<size_t>(i)], cols[static_cast<size_t>(j)]);
      if (std::isinf(c)) {
        masked[static_cast<size_t>(i * m + j)] = 1;
        any_masked = true;
        cost(i, j) = 0.0;
      } else {
        cost(i, j) = c;
        cmax = std::max(cmax, std::abs(c));
      }
    }
  Vector a(n), b(m);
  for (int i = 0; i < n; ++i) a[i] = mu[rows[static_cast<size_t>(i)]];
  for (int j = 0; j < m; ++j) b[j] = mu_p[cols[static_cast<size_t>(j)]];
  // Equalize rounding drift so the last north-west cell closes exactly.
  double gap = a.sum() - b.sum();
  b[m - 1] += gap;

  Simplex sx(cost, masked, n, m);
  sx.northwest_init(a, b);
  if (any_masked) {
    sx.run(true, 1e-12);
    double on_masked = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        if (sx.is_masked(i, j)) on_masked += sx.plan(i, j);
    if (on_masked > 1e-10 * a.sum())
      throw std::runtime_error("exact_ot: no feasible plan avoids the masked cells");
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        if (sx.is_masked(i, j)) sx.plan(i, j) = 0.0;
  }
  sx.run(false, 1e-12 * (1.0 + cmax));

  out.iterations = sx.pivots;
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double x = sx.plan(i, j);
      if (x != 0.0) {
        out.plan(rows[static_cast<size_t>(i)], cols[static_cast<size_t>(j)]) = x;
        total += x * cost(i, j);
      }
    }
  out.cost = total;
  double rgap = (out.plan.rowwise().sum() - mu).cwiseAbs().maxCoeff();
  double cgap = (out.plan.colwise().sum().transpose() - mu_p).cwiseAbs().maxCoeff();
  out.marginal_violation = std::max(rgap, cgap);
  return out;
}

// ----------------------------------------------------------------------
// Sinkhorn.
// ----------------------------------------------------------------------

namespace {

double logsumexp_row(const Matrix& C, const Vector& g, const Vector& logw, Eigen::Index i,
                     double eps) {
  double mx = -kInf;
  for (Eigen::Index j = 0; j < C.cols(); ++j) {
    if (std::isinf(C(i, j)) || std::isinf(logw[j])) continue;
    mx = std::max(mx, logw[j] + (g[j] - C(i, j)) / eps);
  }
  if (mx == -kInf) return -kInf;
  double s = 0.0;
  for (Eigen::Index j = 0; j < C.cols(); ++j) {
    if (std::isinf(C(i, j)) || std::isinf(logw[j])) continue;
    s += std::exp(logw[j] + (g[j] - C(i, j)) / eps - mx);
  }
  return mx + std::log(s);
}

double logsumexp_col(const Matrix& C, const Vector& f, const Vector& logw, Eigen::Index j,
                     double eps) {
  double mx = -kInf;
  for (Eigen::Index i = 0; i < C.rows(); ++i) {
    if (std::isinf(C(i, j)) || std::isinf(logw[i])) continue;
    mx = std::max(mx, logw[i] + (f[i] - C(i, j)) / eps);
  }
  if (mx == -kInf) return -kInf;
  double s = 0.0;
  for (Eigen::Index i = 0; i < C.rows(); ++i) {
    if (std::isinf(C(i, j)) || std::isinf(logw[i])) continue;
    s += std::exp(logw[i] + (f[i] - C(i, j)) / eps - mx);
  }
  return mx + std::log(s);
}

double masked_cost_dot(const Matrix& C, const Matrix& plan) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    for (Eigen::Index j = 0; j < C.cols(); ++j)
      if (!std::isinf(C(i, j))) s += C(i, j) * plan(i, j);
  return s;
}

}  // namespace

OTResult sinkhorn(const Matrix& C, const Vector& mu, const Vector& mu_p, double eps,
                  const SinkhornOptions& opts) {
  require(eps > 0.0, "sinkhorn: eps must be positive");
  const Eigen::Index n = mu.size(), m = mu_p.size();
  require(C.rows() == n && C.cols() == m, "sinkhorn: shape mismatch");
  require((mu.array() >= 0.0).all() && (mu_p.array() >= 0.0).all(), "sinkhorn: negative marginals");

  Matrix K(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      require(!std::isnan(C(i, j)), "sinkhorn: NaN cost");
      K(i, j) = std::isinf(C(i, j)) ? 0.0 : std::exp(-C(i, j) / eps);
    }
  for (Eigen::Index i = 0; i < n; ++i)
    require(mu[i] == 0.0 || K.row(i).sum() > 0.0, "sinkhorn: all-masked row is infeasible");
  for (Eigen::Index j = 0; j < m; ++j)
    require(mu_p[j] == 0.0 || K.col(j).sum() > 0.0, "sinkhorn: all-masked column is infeasible");

  Vector u = opts.warm_u && opts.warm_u->size() == n ? *opts.warm_u : Vector::Ones(n);
  Vector v = opts.warm_v && opts.warm_v->size() == m ? *opts.warm_v : Vector::Ones(m);
  Vector f = Vector::Zero(n), g = Vector::Zero(m);  // absorbed potentials
  bool log_domain = false;
  Vector log_mu(n), log_mup(m);
  for (Eigen::Index i = 0; i < n; ++i) log_mu[i] = mu[i] > 0.0 ? std::log(mu[i]) : -kInf;
  for (Eigen::Index j = 0; j < m; ++j) log_mup[j] = mu_p[j] > 0.0 ? std::log(mu_p[j]) : -kInf;

  auto current_plan = [&]() {
    Matrix plan(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        if (std::isinf(C(i, j))) { plan(i, j) = 0.0; continue; }
        plan(i, j) = u[i] * std::exp((f[i] + g[j] - C(i, j)) / eps) * v[j];
      }
    return plan;
  };

  OTResult out;
  out.converged = false;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    if (!log_domain) {
      Matrix Ks(n, m);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
          Ks(i, j) = std::isinf(C(i, j)) ? 0.0 : std::exp((f[i] + g[j] - C(i, j)) / eps);
      Vector Kv = Ks * v;
      for (Eigen::Index i = 0; i < n; ++i) u[i] = mu[i] > 0.0 ? mu[i] / Kv[i] : 0.0;
      Vector Ktu = Ks.transpose() * u;
      for (Eigen::Index j = 0; j < m; ++j) v[j] = mu_p[j] > 0.0 ? mu_p[j] / Ktu[j] : 0.0;
      bool blowup = !u.allFinite() || !v.allFinite();
      double mag = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) if (u[i] > 0) mag = std::max(mag, std::abs(std::log(u[i])));
      for (Eigen::Index j = 0; j < m; ++j) if (v[j] > 0) mag = std::max(mag, std::abs(std::log(v[j])));
      if (blowup || mag > 30.0) {
        for (Eigen::Index i = 0; i < n; ++i)
          if (u[i] > 0 && std::isfinite(u[i])) { f[i] += eps * std::log(u[i]); u[i] = 1.0; }
        for (Eigen::Index j = 0; j < m; ++j)
          if (v[j] > 0 && std::isfinite(v[j])) { g[j] += eps * std::log(v[j]); v[j] = 1.0; }
        log_domain = true;
        continue;
      }
    } else {
      const Vector zeros_n = Vector::Zero(n), zeros_m = Vector::Zero(m);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (mu[i] == 0.0) { f[i] = -kInf; continue; }
        f[i] = eps * (log_mu[i] - logsumexp_row(C, g, zeros_m, i, eps));
      }
      for (Eigen::Index j = 0; j < m; ++j) {
        if (mu_p[j] == 0.0) { g[j] = -kInf; continue; }
        g[j] = eps * (log_mup[j] - logsumexp_col(C, f, zeros_n, j, eps));
      }
      u.setOnes();
      v.setOnes();
    }
    Matrix plan = current_plan();
    double viol = (plan.rowwise().sum() - mu).cwiseAbs().maxCoeff();
    viol = std::max(viol, (plan.colwise().sum().transpose() - mu_p).cwiseAbs().maxCoeff());
    out.marginal_violation = viol;
    if (viol <= opts.tol) {
      out.converged = true;
      ++it;
      break;
    }
  }
  out.iterations = it;
  out.plan = current_plan();
  out.cost = masked_cost_dot(C, out.plan);
  out.u = Vector(n);
  out.v = Vector(m);
  for (Eigen::Index i = 0; i < n; ++i) out.u[i] = u[i] * std::exp(f[i] / eps);
  for (Eigen::Index j = 0; j < m; ++j) out.v[j] = v[j] * std::exp(g[j] / eps);
  double viol = (out.plan.rowwise().sum() - mu).cwiseAbs().maxCoeff();
  out.marginal_violation =
      std::max(viol, (out.plan.colwise().sum().transpose() - mu_p).cwiseAbs().maxCoeff());
  return out;
}

OTResult unbalanced_sinkhorn(const Matrix& C, const Vector& mu, const Vector& mu_p, double eps,
                             double rho1, double rho2, int max_iter, double tol) {
  require(eps > 0.0 && rho1 > 0.0 && rho2 > 0.0, "unbalanced_sinkhorn: parameters must be positive");
  const Eigen::Index n = mu.size(), m = mu_p.size();
  require(C.rows() == n && C.cols() == m, "unbalanced_sinkhorn: shape mismatch");
  require((mu.array() >= 0.0).all() && (mu_p.array() >= 0.0).all(),
          "unbalanced_sinkhorn: negative marginals");

  Vector log_mu(n), log_mup(m);
  for (Eigen::Index i = 0; i < n; ++i) log_mu[i] = mu[i] > 0.0 ? std::log(mu[i]) : -kInf;
  for (Eigen::Index j = 0; j < m; ++j) log_mup[j] = mu_p[j] > 0.0 ? std::log(mu_p[j]) : -kInf;

  Vector f = Vector::Zero(n), g = Vector::Zero(m);
  const double a1 = rho1 / (rho1 + eps), a2 = rho2 / (rho2 + eps);

  OTResult out;
  out.converged = false;
  int it = 0;
  for (; it < max_iter; ++it) {
    Vector f_old = f, g_old = g;
    for (Eigen::Index i = 0; i < n; ++i) {
      double lse = logsumexp_row(C, g, log_mup, i, eps);
      f[i] = std::isinf(lse) ? 0.0 : -a1 * eps * lse;
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      double lse = logsumexp_col(C, f, log_mu, j, eps);
      g[j] = std::isinf(lse) ? 0.0 : -a2 * eps * lse;
    }
    double delta = std::max((f - f_old).cwiseAbs().maxCoeff(), (g - g_old).cwiseAbs().maxCoeff());
    if (delta / eps <= tol) {
      out.converged = true;
      ++it;
      break;
    }
  }
  out.iterations = it;
  out.plan = Matrix(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      if (std::isinf(C(i, j)) || mu[i] == 0.0 || mu_p[j] == 0.0) { out.plan(i, j) = 0.0; continue; }
      out.plan(i, j) = mu[i] * mu_p[j] * std::exp((f[i] + g[j] - C(i, j)) / eps);
    }
  out.cost = masked_cost_dot(C, out.plan);
  double rgap = (out.plan.rowwise().sum() - mu).cwiseAbs().maxCoeff();
  double cgap = (out.plan.colwise().sum().transpose() - mu_p).cwiseAbs().maxCoeff();
  out.marginal_violation = std::max(rgap, cgap);
  out.u = f;
  out.v = g;
  return out;
}

Vector simplex_project(const Vector& v) {
  require(v.size() > 0, "simplex_project: empty vector");
  require(v.allFinite(), "simplex_project: non-finite input");
  const Eigen::Index n = v.size();
  std::vector<double> s(v.data(), v.data() + n);
  std::sort(s.begin(), s.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  int rho = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cum += s[static_cast<size_t>(k)];
    double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (s[static_cast<size_t>(k)] - t > 0.0) {
      rho = static_cast<int>(k + 1);
      tau = t;
    }
  }
  (void)rho;
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = std::max(v[i] - tau, 0.0);
  return out;
}

}  // namespace partnet
