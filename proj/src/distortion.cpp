#include "partnet/distortion.hpp"

#include <cmath>
#include <limits>

namespace partnet {

Matrix apply_distortion(const Matrix& omega, const Matrix& omega_p, const Matrix& pi,
                        const Vector& mu, const Vector& mu_p) {
  require(pi.rows() == omega.cols() && pi.cols() == omega_p.cols(),
          "apply_distortion: pi shape incompatible with kernels");
  require(mu.size() == omega.cols() && mu_p.size() == omega_p.cols(),
          "apply_distortion: marginal length mismatch");
  require(omega.allFinite() && omega_p.allFinite() && pi.allFinite() && mu.allFinite() &&
              mu_p.allFinite(),
          "apply_distortion: non-finite input");
  Vector left = 0.5 * omega.array().square().matrix() * mu;
  Vector right = 0.5 * omega_p.array().square().matrix() * mu_p;
  Matrix out = left.replicate(1, omega_p.rows());
  out.rowwise() += right.transpose();
  out.noalias() -= omega * pi * omega_p.transpose();
  return out;
}

Matrix apply_distortion_auto(const Matrix& omega, const Matrix& omega_p, const Matrix& pi) {
  Vector mu = pi.rowwise().sum();
  Vector mu_p = pi.colwise().sum().transpose();
  return apply_distortion(omega, omega_p, pi, mu, mu_p);
}

namespace {

Eigen::Index count_support(const Matrix& m) {
  Eigen::Index c = 0;
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (m.data()[i] != 0.0) ++c;
  return c;
}

}  // namespace

double distortion_value(const Matrix& omega, const Matrix& omega_p, const Matrix& pi_i,
                        const Matrix& pi_j) {
  require(pi_i.rows() == omega.rows() && pi_i.cols() == omega_p.rows(),
          "distortion_value: pi_i shape mismatch");
  require(pi_j.rows() == omega.cols() && pi_j.cols() == omega_p.cols(),
          "distortion_value: pi_j shape mismatch");
  // Sparse couplings (diagonal, permutation-like) go through the defining
  // sum: no cancellation, so identical kernels give an exact zero.
  Eigen::Index cap_i = 2 * (pi_i.rows() + pi_i.cols());
  Eigen::Index cap_j = 2 * (pi_j.rows() + pi_j.cols());
  if (count_support(pi_i) <= cap_i && count_support(pi_j) <= cap_j) {
    double s = 0.0;
    for (Eigen::Index a = 0; a < pi_i.rows(); ++a)
      for (Eigen::Index b = 0; b < pi_i.cols(); ++b) {
        if (pi_i(a, b) == 0.0) continue;
        for (Eigen::Index c = 0; c < pi_j.rows(); ++c)
          for (Eigen::Index d = 0; d < pi_j.cols(); ++d) {
            if (pi_j(c, d) == 0.0) continue;
            double diff = omega(a, c) - omega_p(b, d);
            s += 0.5 * diff * diff * pi_i(a, b) * pi_j(c, d);
          }
      }
    return s;
  }
  Matrix contracted = apply_distortion_auto(omega, omega_p, pi_j);
  return contracted.cwiseProduct(pi_i).sum();
}

namespace {

// Pulls the (i,j) kernel block of a network, materializing absent blocks as
// zeros only when the other network has the block.
Matrix zero_block(const PartitionedNetwork& P, int i, int j) {
  return Matrix::Zero(P.part_size(i), P.part_size(j));
}

}  // namespace

ObjectiveBreakdown objective(const PartitionedNetwork& P, const PartitionedNetwork& P_p,
                             const LabelCostPair* labels, const PartitionedCoupling& coupling,
                             const ObjectiveConfig& config) {
  const int k = P.num_parts();
  require(P_p.num_parts() == k, "objective: part count mismatch");
  require(coupling.num_parts() == k, "objective: coupling part count mismatch");
  for (int i = 0; i < k; ++i) {
    require(coupling.blocks[static_cast<size_t>(i)].rows() == P.part_size(i) &&
                coupling.blocks[static_cast<size_t>(i)].cols() == P_p.part_size(i),
            "objective: coupling block shape mismatch");
  }

  ObjectiveBreakdown out;
  bool masked_hit = false;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const Matrix* a = P.block(i, j);
      const Matrix* b = P_p.block(i, j);
      if (!a && !b) continue;
      Matrix za, zb;
      if (!a) { za = zero_block(P, i, j); a = &za; }
      if (!b) { zb = zero_block(P_p, i, j); b = &zb; }
      out.quadratic_terms[{i, j}] = distortion_value(
          *a, *b, coupling.blocks[static_cast<size_t>(i)], coupling.blocks[static_cast<size_t>(j)]);
    }
  }
  if (labels) {
    for (const auto& [i, C] : labels->blocks) {
      const Matrix& pi = coupling.blocks[static_cast<size_t>(i)];
      require(C.rows() == pi.rows() && C.cols() == pi.cols(), "objective: label block shape mismatch");
      double term = 0.0;
      for (Eigen::Index a = 0; a < C.rows(); ++a)
        for (Eigen::Index b = 0; b < C.cols(); ++b) {
          if (std::isinf(C(a, b))) {
            if (pi(a, b) > 0.0) masked_hit = true;
          } else {
            term += C(a, b) * pi(a, b);
          }
        }
      out.label_terms[i] = term;
    }
  }
  if (!config.eps.empty()) {
    require(static_cast<int>(config.eps.size()) == k, "objective: eps length mismatch");
    for (int i = 0; i < k; ++i) {
      if (config.eps[static_cast<size_t>(i)] == 0.0) continue;
      const Matrix& pi = coupling.blocks[static_cast<size_t>(i)];
      Matrix ref = P.parts[static_cast<size_t>(i)].mu * P_p.parts[static_cast<size_t>(i)].mu.transpose();
      double kl = 0.0;
      for (Eigen::Index a = 0; a < pi.rows(); ++a)
        for (Eigen::Index b = 0; b < pi.cols(); ++b) {
          double x = pi(a, b), r = ref(a, b);
          if (x > 0.0) kl += x * std::log(x / r) - x + r;
          else kl += r;
        }
      out.regularizer_terms[i] = config.eps[static_cast<size_t>(i)] * kl;
    }
  }
  if (masked_hit) {
    out.total_L = std::numeric_limits<double>::infinity();
    for (auto& [i, v] : out.label_terms) v = std::numeric_limits<double>::infinity();
  } else {
    out.total_L = 0.5 * out.quadratic_sum() + out.label_sum();
  }
  return out;
}

double distance_from_objective(double total_L_unregularized) {
  require(total_L_unregularized >= -1e-12, "distance_from_objective: negative objective");
  return std::sqrt(std::max(0.0, total_L_unregularized));
}

double evaluate_distance_p(const PartitionedNetwork& P, const PartitionedNetwork& P_p,
                           const PartitionedCoupling& coupling, double p) {
  require(p >= 1.0, "evaluate_distance_p: p must be >= 1 or inf");
  const int k = P.num_parts();
  require(P_p.num_parts() == k && coupling.num_parts() == k, "evaluate_distance_p: shape mismatch");

  const bool pinf = std::isinf(p);
  double accum = 0.0;
  double sup = 0.0;
  for (int i = 0; i < k; ++i) {
    const Matrix& pi_i = coupling.blocks[static_cast<size_t>(i)];
    for (int j = 0; j < k; ++j) {
      const Matrix& pi_j = coupling.blocks[static_cast<size_t>(j)];
      const Matrix* a = P.block(i, j);
      const Matrix* b = P_p.block(i, j);
      if (!a && !b) continue;
      Matrix za, zb;
      if (!a) { za = Matrix::Zero(P.part_size(i), P.part_size(j)); a = &za; }
      if (!b) { zb = Matrix::Zero(P_p.part_size(i), P_p.part_size(j)); b = &zb; }
      if (pinf) {
        for (Eigen::Index x = 0; x < pi_i.rows(); ++x)
          for (Eigen::Index xp = 0; xp < pi_i.cols(); ++xp) {
            if (pi_i(x, xp) <= 0.0) continue;
            for (Eigen::Index y = 0; y < pi_j.rows(); ++y)
              for (Eigen::Index yp = 0; yp < pi_j.cols(); ++yp) {
                if (pi_j(y, yp) <= 0.0) continue;
                sup = std::max(sup, std::abs((*a)(x, y) - (*b)(xp, yp)));
              }
          }
      } else if (p == 2.0) {
        accum += 2.0 * distortion_value(*a, *b, pi_i, pi_j);
      } else {
        for (Eigen::Index x = 0; x < pi_i.rows(); ++x)
          for (Eigen::Index xp = 0; xp < pi_i.cols(); ++xp) {
            if (pi_i(x, xp) == 0.0) continue;
            for (Eigen::Index y = 0; y < pi_j.rows(); ++y)
              for (Eigen::Index yp = 0; yp < pi_j.cols(); ++yp) {
                if (pi_j(y, yp) == 0.0) continue;
                accum += std::pow(std::abs((*a)(x, y) - (*b)(xp, yp)), p) * pi_i(x, xp) * pi_j(y, yp);
              }
          }
      }
    }
  }
  if (pinf) return 0.5 * sup;
  return 0.5 * std::pow(accum, 1.0 / p);
}

}  // namespace partnet
