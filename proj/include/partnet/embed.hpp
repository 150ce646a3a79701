#pragma once

#include <optional>

#include "partnet/types.hpp"

namespace partnet {

// Appends a one-node part with Dirac weight; kernel blocks touching the new
// part stay absent (identically zero), so distances are preserved.
PartitionedNetwork embed_add_singleton(const PartitionedNetwork& P);

// A measure hypernetwork (nodes, hyperedges, incidence) as a 2-partitioned
// network whose only kernel block is (0,1) = incidence.
PartitionedNetwork embed_hypernetwork(const Vector& nodes_mu, const Vector& edges_mu,
                                      const Matrix& incidence);

// Augmented variant: additionally carries the node-node kernel at (0,0).
PartitionedNetwork embed_augmented(const Matrix& omega_X, const Matrix& omega_XY,
                                   const Vector& mu, const Vector& nu);

// The inf-masked labelled picture of a pair of k-partitioned networks:
// both collapse to single-part networks (weights mu/k in balanced mode) and
// the part structure moves into an inf-masked label cost. Finite extra label
// costs, when given, are merged onto the block-diagonal cells.
struct MaskedLabelledProblem {
  PartitionedNetwork source;
  PartitionedNetwork target;
  LabelCostPair labels;
};

MaskedLabelledProblem partition_to_masked_labelled(const PartitionedNetwork& P,
                                                   const PartitionedNetwork& P_p,
                                                   const LabelCostPair* extra_labels = nullptr);

// Lemma-style coupling transfer between the two pictures: a single-part
// coupling supported on the diagonal blocks corresponds to the k-partitioned
// coupling pi_i = k * (pi restricted to block i), and conversely.
PartitionedCoupling masked_to_partitioned_coupling(const PartitionedNetwork& P,
                                                   const PartitionedNetwork& P_p,
                                                   const Matrix& masked_pi);
Matrix partitioned_to_masked_coupling(const PartitionedNetwork& P, const PartitionedNetwork& P_p,
                                      const PartitionedCoupling& coupling);

}  // namespace partnet
