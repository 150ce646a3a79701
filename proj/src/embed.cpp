#include "partnet/embed.hpp"

#include <cmath>
#include <limits>

namespace partnet {

PartitionedNetwork embed_add_singleton(const PartitionedNetwork& P) {
  P.validate();
  PartitionedNetwork out = P;
  Part extra;
  extra.name = "singleton" + std::to_string(P.num_parts());
  extra.size = 1;
  extra.mu = Vector::Ones(1);
  if (P.mode == Mode::unbalanced) extra.mu *= P.part_mass(0);
  out.parts.push_back(std::move(extra));
  return out;
}

PartitionedNetwork embed_hypernetwork(const Vector& nodes_mu, const Vector& edges_mu,
                                      const Matrix& incidence) {
  require(incidence.rows() == nodes_mu.size() && incidence.cols() == edges_mu.size(),
          "embed_hypernetwork: incidence shape mismatch");
  PartitionedNetwork out;
  out.mode = Mode::balanced;
  out.parts.push_back({"nodes", nodes_mu.size(), nodes_mu});
  out.parts.push_back({"edges", edges_mu.size(), edges_mu});
  out.set_block(0, 1, incidence);
  out.validate();
  return out;
}

PartitionedNetwork embed_augmented(const Matrix& omega_X, const Matrix& omega_XY,
                                   const Vector& mu, const Vector& nu) {
  require(omega_X.rows() == mu.size() && omega_X.cols() == mu.size(),
          "embed_augmented: omega_X shape mismatch");
  require(omega_XY.rows() == mu.size() && omega_XY.cols() == nu.size(),
          "embed_augmented: omega_XY shape mismatch");
  PartitionedNetwork out;
  out.mode = Mode::balanced;
  out.parts.push_back({"samples", mu.size(), mu});
  out.parts.push_back({"features", nu.size(), nu});
  if (!omega_X.isZero(0.0)) out.set_block(0, 0, omega_X);
  out.set_block(0, 1, omega_XY);
  out.validate();
  return out;
}

namespace {

PartitionedNetwork collapse_to_single_part(const PartitionedNetwork& P) {
  const int k = P.num_parts();
  const Eigen::Index n = P.total_size();
  PartitionedNetwork out;
  out.mode = P.mode;
  Vector mu(n);
  Eigen::Index off = 0;
  for (const auto& part : P.parts) {
    mu.segment(off, part.size) = part.mu;
    off += part.size;
  }
  if (P.mode == Mode::balanced) mu /= static_cast<double>(k);
  out.parts.push_back({"all", n, mu});

  Matrix omega = Matrix::Zero(n, n);
  std::vector<Eigen::Index> offsets(static_cast<size_t>(k) + 1, 0);
  for (int i = 0; i < k; ++i) offsets[static_cast<size_t>(i) + 1] = offsets[static_cast<size_t>(i)] + P.part_size(i);
  for (const auto& [key, blk] : P.kernel) {
    auto [i, j] = key;
    omega.block(offsets[static_cast<size_t>(i)], offsets[static_cast<size_t>(j)], blk.rows(), blk.cols()) = blk;
  }
  if (!omega.isZero(0.0)) out.set_block(0, 0, omega);
  return out;
}

}  // namespace

MaskedLabelledProblem partition_to_masked_labelled(const PartitionedNetwork& P,
                                                   const PartitionedNetwork& P_p,
                                                   const LabelCostPair* extra_labels) {
  P.validate();
  P_p.validate();
  require(P.num_parts() == P_p.num_parts(), "masked embedding: part count mismatch");
  const int k = P.num_parts();
  const double inf = std::numeric_limits<double>::infinity();

  MaskedLabelledProblem out;
  out.source = collapse_to_single_part(P);
  out.target = collapse_to_single_part(P_p);

  Matrix C = Matrix::Zero(P.total_size(), P_p.total_size());
  Eigen::Index r0 = 0;
  for (int i = 0; i < k; ++i) {
    Eigen::Index c0 = 0;
    for (int j = 0; j < k; ++j) {
      if (i != j) {
        C.block(r0, c0, P.part_size(i), P_p.part_size(j)).setConstant(inf);
      } else if (extra_labels) {
        if (const Matrix* extra = extra_labels->block(i)) {
          C.block(r0, c0, P.part_size(i), P_p.part_size(j)) = *extra;
        }
      }
      c0 += P_p.part_size(j);
    }
    r0 += P.part_size(i);
  }
  if (k > 1 || extra_labels) out.labels.blocks[0] = std::move(C);
  return out;
}

PartitionedCoupling masked_to_partitioned_coupling(const PartitionedNetwork& P,
                                                   const PartitionedNetwork& P_p,
                                                   const Matrix& masked_pi) {
  const int k = P.num_parts();
  require(masked_pi.rows() == P.total_size() && masked_pi.cols() == P_p.total_size(),
          "masked coupling shape mismatch");
  PartitionedCoupling out;
  out.mode = P.mode;
  Eigen::Index r0 = 0;
  for (int i = 0; i < k; ++i) {
    Eigen::Index c0 = 0;
    for (int j = 0; j < i; ++j) c0 += P_p.part_size(j);
    out.blocks.push_back(static_cast<double>(k) *
                         masked_pi.block(r0, c0, P.part_size(i), P_p.part_size(i)));
    r0 += P.part_size(i);
  }
  return out;
}

Matrix partitioned_to_masked_coupling(const PartitionedNetwork& P, const PartitionedNetwork& P_p,
                                      const PartitionedCoupling& coupling) {
  const int k = P.num_parts();
  require(coupling.num_parts() == k, "coupling part count mismatch");
  Matrix pi = Matrix::Zero(P.total_size(), P_p.total_size());
  Eigen::Index r0 = 0, c0 = 0;
  for (int i = 0; i < k; ++i) {
    pi.block(r0, c0, P.part_size(i), P_p.part_size(i)) =
        coupling.blocks[static_cast<size_t>(i)] / static_cast<double>(k);
    r0 += P.part_size(i);
    c0 += P_p.part_size(i);
  }
  return pi;
}

}  // namespace partnet
