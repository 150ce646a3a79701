#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace partnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Structural tolerances. Marginal checks are looser than mass checks because
// couplings typically come out of iterative solvers.
inline constexpr double kMassTol = 1e-12;
inline constexpr double kUnbalancedMassTol = 1e-10;
inline constexpr double kDefaultMarginalTol = 1e-8;

enum class Mode { balanced, unbalanced };

struct Part {
  std::string name;
  Eigen::Index size = 0;
  Vector mu;
};

using BlockKey = std::pair<int, int>;
using BlockMap = std::map<BlockKey, Matrix>;

// A k-partitioned measure network: k weighted node classes plus a
// block-sparse kernel over the union. Blocks that are identically zero are
// simply not stored; every contraction skips them.
struct PartitionedNetwork {
  std::vector<Part> parts;
  BlockMap kernel;
  Mode mode = Mode::balanced;

  int num_parts() const { return static_cast<int>(parts.size()); }
  Eigen::Index part_size(int i) const { return parts[static_cast<size_t>(i)].size; }
  Eigen::Index total_size() const;
  const Matrix* block(int i, int j) const;
  void set_block(int i, int j, Matrix m);
  double part_mass(int i) const { return parts[static_cast<size_t>(i)].mu.sum(); }

  void validate() const;
};

// Per-part label-matching cost matrices C_i, entries in [0, +inf]. An
// infinite entry is a mask: couplings may carry no mass there. Absent blocks
// mean identically-zero cost.
struct LabelCostPair {
  std::map<int, Matrix> blocks;

  const Matrix* block(int i) const;
  void validate(const PartitionedNetwork& src, const PartitionedNetwork& dst) const;
};

// One transport plan per part. Balanced couplings must match the part
// marginals; unbalanced couplings must agree on total mass across parts.
struct PartitionedCoupling {
  std::vector<Matrix> blocks;
  Mode mode = Mode::balanced;
  double marginal_tol = kDefaultMarginalTol;

  int num_parts() const { return static_cast<int>(blocks.size()); }

  void validate(const PartitionedNetwork& src, const PartitionedNetwork& dst) const;
};

struct ObjectiveBreakdown {
  std::map<BlockKey, double> quadratic_terms;  // <L(w_ij, w'_ij), pi_i (x) pi_j>
  std::map<int, double> label_terms;           // <C_i, pi_i>
  std::map<int, double> regularizer_terms;     // entropic / KL contributions
  double total_L = 0.0;                        // 1/2 sum quad + sum label

  double quadratic_sum() const;
  double label_sum() const;
  double regularizer_sum() const;
};

// Canonical couplings.
PartitionedCoupling product_coupling(const PartitionedNetwork& src, const PartitionedNetwork& dst);
PartitionedCoupling diagonal_coupling(const PartitionedNetwork& src, const PartitionedNetwork& dst);

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace partnet
