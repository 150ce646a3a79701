#include "partnet/assignment.hpp"

#include <cmath>
#include <limits>

namespace partnet {

namespace {

// O(n^3) shortest-augmenting-path assignment on a square cost matrix
// (minimizing). Deterministic: rows processed in order, ties resolved by
// the scan order over columns.
std::vector<int> solve_square_min(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      int i0 = p[static_cast<size_t>(j0)], j1 = -1;
      double delta = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> col_of_row(static_cast<size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<size_t>(j)] != 0) col_of_row[static_cast<size_t>(p[static_cast<size_t>(j)]) - 1] = j - 1;
  return col_of_row;
}

// Pads to square, negates, solves, strips dummies.
Assignment solve_max(const Matrix& score) {
  const int n = static_cast<int>(score.rows());
  const int m = static_cast<int>(score.cols());
  const int s = std::max(n, m);
  Matrix cost = Matrix::Zero(s, s);
  cost.topLeftCorner(n, m) = -score;
  std::vector<int> sol = solve_square_min(cost);
  Assignment out;
  out.col_of_row.assign(static_cast<size_t>(n), -1);
  out.value = 0.0;
  for (int r = 0; r < n; ++r) {
    if (sol[static_cast<size_t>(r)] < m) {
      out.col_of_row[static_cast<size_t>(r)] = sol[static_cast<size_t>(r)];
      out.value += score(r, sol[static_cast<size_t>(r)]);
    }
  }
  return out;
}

constexpr int kUndecided = -1;
constexpr int kUnassigned = -2;

// Best achievable value with rows pinned per `decision` (>= 0 pinned to that
// column, kUnassigned excluded from the matching, kUndecided free).
double best_with_decision(const Matrix& score, const std::vector<int>& decision) {
  const int n = static_cast<int>(score.rows());
  const int m = static_cast<int>(score.cols());
  std::vector<char> col_taken(static_cast<size_t>(m), 0);
  std::vector<int> free_rows;
  double base = 0.0;
  for (int r = 0; r < n; ++r) {
    int d = decision[static_cast<size_t>(r)];
    if (d >= 0) {
      col_taken[static_cast<size_t>(d)] = 1;
      base += score(r, d);
    } else if (d == kUndecided) {
      free_rows.push_back(r);
    }
  }
  std::vector<int> free_cols;
  for (int c = 0; c < m; ++c)
    if (!col_taken[static_cast<size_t>(c)]) free_cols.push_back(c);
  if (free_rows.empty() || free_cols.empty()) return base;
  Matrix sub(static_cast<Eigen::Index>(free_rows.size()), static_cast<Eigen::Index>(free_cols.size()));
  for (size_t a = 0; a < free_rows.size(); ++a)
    for (size_t b = 0; b < free_cols.size(); ++b)
      sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = score(free_rows[a], free_cols[b]);
  return base + solve_max(sub).value;
}

}  // namespace

Assignment max_assignment(const Matrix& score) {
  require(score.size() > 0, "max_assignment: empty matrix");
  require(score.allFinite(), "max_assignment: non-finite scores");
  return solve_max(score);
}

Assignment round_to_permutation(const Matrix& pi) {
  require(pi.size() > 0, "round_to_permutation: empty matrix");
  require(pi.allFinite() && (pi.array() >= 0.0).all(),
          "round_to_permutation: plan must be nonnegative and finite");
  const int n = static_cast<int>(pi.rows());
  const int m = static_cast<int>(pi.cols());
  const double opt = solve_max(pi).value;
  const double tol = 1e-9 * std::max(1.0, std::abs(opt));

  // Greedy lexicographic pin-down over the argmax set: row by row, keep the
  // smallest column that still completes to the optimal value.
  std::vector<int> decision(static_cast<size_t>(n), kUndecided);
  std::vector<char> col_taken(static_cast<size_t>(m), 0);
  for (int r = 0; r < n; ++r) {
    int chosen = kUnassigned;
    for (int c = 0; c < m; ++c) {
      if (col_taken[static_cast<size_t>(c)]) continue;
      decision[static_cast<size_t>(r)] = c;
      if (best_with_decision(pi, decision) >= opt - tol) {
        chosen = c;
        break;
      }
    }
    decision[static_cast<size_t>(r)] = chosen;
    if (chosen >= 0) col_taken[static_cast<size_t>(chosen)] = 1;
  }

  Assignment out;
  out.col_of_row.assign(static_cast<size_t>(n), -1);
  out.value = 0.0;
  for (int r = 0; r < n; ++r) {
    if (decision[static_cast<size_t>(r)] >= 0) {
      out.col_of_row[static_cast<size_t>(r)] = decision[static_cast<size_t>(r)];
      out.value += pi(r, decision[static_cast<size_t>(r)]);
    }
  }
  return out;
}

}  // namespace partnet
