#include "partnet/types.hpp"

#include <cmath>

namespace partnet {

Eigen::Index PartitionedNetwork::total_size() const {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size;
  return n;
}

const Matrix* PartitionedNetwork::block(int i, int j) const {
  auto it = kernel.find({i, j});
  return it == kernel.end() ? nullptr : &it->second;
}

void PartitionedNetwork::set_block(int i, int j, Matrix m) {
  require(i >= 0 && i < num_parts() && j >= 0 && j < num_parts(), "block index out of range");
  require(m.rows() == part_size(i) && m.cols() == part_size(j), "kernel block shape mismatch");
  kernel[{i, j}] = std::move(m);
}

void PartitionedNetwork::validate() const {
  require(!parts.empty(), "network needs at least one part");
  for (const auto& p : parts) {
    require(p.size >= 1, "part size must be positive");
    require(p.mu.size() == p.size, "mu length mismatch");
    for (Eigen::Index a = 0; a < p.mu.size(); ++a) {
      require(std::isfinite(p.mu[a]) && p.mu[a] >= 0.0, "mu entries must be finite and nonnegative");
    }
  }
  if (mode == Mode::balanced) {
    for (const auto& p : parts)
      require(std::abs(p.mu.sum() - 1.0) <= kMassTol, "balanced mode: each mu must sum to 1");
  } else {
    double m0 = parts.front().mu.sum();
    require(m0 > 0.0, "unbalanced mode: part mass must be positive");
    for (const auto& p : parts)
      require(std::abs(p.mu.sum() - m0) <= kMassTol, "unbalanced mode: part masses must agree");
  }
  for (const auto& [key, blk] : kernel) {
    auto [i, j] = key;
    require(i >= 0 && i < num_parts() && j >= 0 && j < num_parts(), "kernel block index out of range");
    require(blk.rows() == part_size(i) && blk.cols() == part_size(j), "kernel block shape mismatch");
    require(blk.allFinite(), "kernel entries must be finite");
  }
}

const Matrix* LabelCostPair::block(int i) const {
  auto it = blocks.find(i);
  return it == blocks.end() ? nullptr : &it->second;
}

void LabelCostPair::validate(const PartitionedNetwork& src, const PartitionedNetwork& dst) const {
  require(src.num_parts() == dst.num_parts(), "label cost: networks must have matching part counts");
  for (const auto& [i, C] : blocks) {
    require(i >= 0 && i < src.num_parts(), "label cost block index out of range");
    require(C.rows() == src.part_size(i) && C.cols() == dst.part_size(i), "label cost block shape mismatch");
    for (Eigen::Index a = 0; a < C.rows(); ++a)
      for (Eigen::Index b = 0; b < C.cols(); ++b) {
        double v = C(a, b);
        require(!std::isnan(v) && v >= 0.0, "label costs must be nonnegative (inf allowed), no NaN");
      }
  }
}

void PartitionedCoupling::validate(const PartitionedNetwork& src, const PartitionedNetwork& dst) const {
  require(num_parts() == src.num_parts() && num_parts() == dst.num_parts(),
          "coupling part count mismatch");
  for (int i = 0; i < num_parts(); ++i) {
    const Matrix& pi = blocks[static_cast<size_t>(i)];
    require(pi.rows() == src.part_size(i) && pi.cols() == dst.part_size(i), "coupling block shape mismatch");
    require(pi.allFinite(), "coupling entries must be finite");
    require((pi.array() >= 0.0).all(), "coupling entries must be nonnegative");
  }
  if (mode == Mode::balanced) {
    for (int i = 0; i < num_parts(); ++i) {
      const Matrix& pi = blocks[static_cast<size_t>(i)];
      double row_gap = (pi.rowwise().sum() - src.parts[static_cast<size_t>(i)].mu).cwiseAbs().maxCoeff();
      double col_gap = (pi.colwise().sum().transpose() - dst.parts[static_cast<size_t>(i)].mu).cwiseAbs().maxCoeff();
      require(row_gap <= marginal_tol && col_gap <= marginal_tol,
              "balanced coupling: marginals violate tolerance");
    }
  } else {
    double m0 = blocks.front().sum();
    for (const auto& pi : blocks)
      require(std::abs(pi.sum() - m0) <= kUnbalancedMassTol,
              "unbalanced coupling: cross-part masses must agree");
  }
}

double ObjectiveBreakdown::quadratic_sum() const {
  double s = 0.0;
  for (const auto& [k, v] : quadratic_terms) s += v;
  return s;
}

double ObjectiveBreakdown::label_sum() const {
  double s = 0.0;
  for (const auto& [k, v] : label_terms) s += v;
  return s;
}

double ObjectiveBreakdown::regularizer_sum() const {
  double s = 0.0;
  for (const auto& [k, v] : regularizer_terms) s += v;
  return s;
}

PartitionedCoupling product_coupling(const PartitionedNetwork& src, const PartitionedNetwork& dst) {
  require(src.num_parts() == dst.num_parts(), "product coupling: part count mismatch");
  require(src.mode == dst.mode, "product coupling: mode mismatch");
  PartitionedCoupling out;
  out.mode = src.mode;
  for (int i = 0; i < src.num_parts(); ++i) {
    const Vector& a = src.parts[static_cast<size_t>(i)].mu;
    const Vector& b = dst.parts[static_cast<size_t>(i)].mu;
    Matrix pi = a * b.transpose();
    if (src.mode == Mode::unbalanced) pi /= std::sqrt(a.sum() * b.sum());
    out.blocks.push_back(std::move(pi));
  }
  return out;
}

PartitionedCoupling diagonal_coupling(const PartitionedNetwork& src, const PartitionedNetwork& dst) {
  require(src.num_parts() == dst.num_parts(), "diagonal coupling: part count mismatch");
  PartitionedCoupling out;
  out.mode = src.mode;
  for (int i = 0; i < src.num_parts(); ++i) {
    require(src.part_size(i) == dst.part_size(i), "diagonal coupling needs equal part sizes");
    const Vector& a = src.parts[static_cast<size_t>(i)].mu;
    const Vector& b = dst.parts[static_cast<size_t>(i)].mu;
    require((a - b).cwiseAbs().maxCoeff() <= kDefaultMarginalTol,
            "diagonal coupling needs matching weights");
    out.blocks.push_back(Matrix(a.asDiagonal()));
  }
  return out;
}

}  // namespace partnet
