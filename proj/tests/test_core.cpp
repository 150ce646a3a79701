#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "partnet/distortion.hpp"
#include "partnet/divergence.hpp"
#include "partnet/embed.hpp"
#include "partnet/types.hpp"
#include "test_util.hpp"

using namespace partnet;
using testutil::random_coupling;
using testutil::random_matrix;
using testutil::random_network;
using testutil::random_prob;

namespace {

PartitionedNetwork one_point_network(double a) {
  PartitionedNetwork P;
  P.parts.push_back({"p0", 1, Vector::Ones(1)});
  P.set_block(0, 0, Matrix::Constant(1, 1, a));
  return P;
}

}  // namespace

TEST_CASE("apply_distortion trivial cases") {
  std::mt19937_64 rng(7);
  Matrix z = Matrix::Zero(3, 2);
  Matrix zp = Matrix::Zero(4, 5);
  Matrix pi = random_matrix(rng, 2, 5, 0.0, 1.0);
  Matrix out = apply_distortion(z, zp, pi, pi.rowwise().sum(), pi.colwise().sum().transpose());
  CHECK(out.cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  Matrix a = Matrix::Constant(1, 1, 1.5), b = Matrix::Constant(1, 1, -0.5);
  Matrix one = Matrix::Ones(1, 1);
  Matrix r = apply_distortion(a, b, one, Vector::Ones(1), Vector::Ones(1));
  CHECK(r(0, 0) == doctest::Approx(0.5 * 2.0 * 2.0));
}

TEST_CASE("apply_distortion matches quadruple-loop oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    int n = testutil::uniform_int(rng, 1, 6), m = testutil::uniform_int(rng, 1, 6);
    int np = testutil::uniform_int(rng, 1, 6), mp = testutil::uniform_int(rng, 1, 6);
    Matrix w = random_matrix(rng, n, m), wp = random_matrix(rng, np, mp);
    Matrix pi = random_matrix(rng, m, mp, 0.0, 1.0);
    Matrix fast = apply_distortion(w, wp, pi, pi.rowwise().sum(), pi.colwise().sum().transpose());
    Matrix slow = oracle::distortion_contract(w, wp, pi);
    CHECK((fast - slow).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("apply_distortion rejects bad input") {
  Matrix w = Matrix::Zero(2, 3), wp = Matrix::Zero(2, 2), pi = Matrix::Zero(3, 2);
  CHECK_THROWS_AS(apply_distortion(w, wp, pi, Vector::Ones(2), Vector::Ones(2)),
                  std::invalid_argument);
  Matrix bad = Matrix::Constant(3, 2, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(apply_distortion(w, wp, bad, Vector::Ones(3), Vector::Ones(2)),
                  std::invalid_argument);
}

TEST_CASE("distortion_value trivial and oracle") {
  // Identical kernels under a diagonal coupling.
  std::mt19937_64 rng(3);
  Matrix w = random_matrix(rng, 3, 3);
  Matrix diag = Matrix::Identity(3, 3) / 3.0;
  CHECK(distortion_value(w, w, diag, diag) == doctest::Approx(0.0));

  Matrix a = Matrix::Constant(1, 1, 2.0), b = Matrix::Constant(1, 1, -1.0);
  Matrix one = Matrix::Ones(1, 1);
  CHECK(distortion_value(a, b, one, one) == doctest::Approx(0.5 * 9.0));

  for (int trial = 0; trial < 20; ++trial) {
    Matrix w1 = random_matrix(rng, 3, 3), w2 = random_matrix(rng, 3, 3);
    Vector mu = random_prob(rng, 3), nu = random_prob(rng, 3);
    Matrix pi_i = mu * nu.transpose();
    Matrix pi_j = random_coupling(rng, mu, nu);
    double fast = distortion_value(w1, w2, pi_i, pi_j);
    double slow = oracle::distortion_inner(w1, w2, pi_i, pi_j);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-12));
    CHECK(fast >= 0.0);
  }
}

TEST_CASE("objective: self distance is exactly zero under diagonal coupling") {
  std::mt19937_64 rng(5);
  PartitionedNetwork P = random_network(rng, {3, 2});
  PartitionedCoupling diag = diagonal_coupling(P, P);
  ObjectiveBreakdown b = objective(P, P, nullptr, diag);
  CHECK(b.total_L == 0.0);  // bit-level: every summand is (x - x)^2
}

TEST_CASE("objective: 1-point networks") {
  PartitionedNetwork P = one_point_network(1.0), Q = one_point_network(3.0);
  PartitionedCoupling cpl;
  cpl.blocks.push_back(Matrix::Ones(1, 1));
  ObjectiveBreakdown b = objective(P, Q, nullptr, cpl);
  CHECK(b.total_L == doctest::Approx(0.25 * 4.0));  // 1/4 (a-b)^2
}

TEST_CASE("objective matches direct-sum oracle on random k=2 instances") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    PartitionedNetwork P = random_network(rng, {3, 2});
    PartitionedNetwork Q = random_network(rng, {2, 4});
    PartitionedCoupling cpl;
    cpl.blocks.push_back(random_coupling(rng, P.parts[0].mu, Q.parts[0].mu));
    cpl.blocks.push_back(random_coupling(rng, P.parts[1].mu, Q.parts[1].mu));
    ObjectiveBreakdown b = objective(P, Q, nullptr, cpl);
    CHECK(b.total_L == doctest::Approx(oracle::full_objective(P, Q, cpl)).epsilon(1e-12));
    CHECK(b.total_L == doctest::Approx(0.5 * b.quadratic_sum() + b.label_sum()).epsilon(1e-12));
  }
}

TEST_CASE("objective returns +inf when mass sits on a masked label cell") {
  PartitionedNetwork P = one_point_network(1.0), Q = one_point_network(1.0);
  PartitionedCoupling cpl;
  cpl.blocks.push_back(Matrix::Ones(1, 1));
  LabelCostPair labels;
  labels.blocks[0] = Matrix::Constant(1, 1, std::numeric_limits<double>::infinity());
  ObjectiveBreakdown b = objective(P, Q, &labels, cpl);
  CHECK(std::isinf(b.total_L));
}

TEST_CASE("distance_from_objective") {
  CHECK(distance_from_objective(0.0) == 0.0);
  // 1-point networks: L = 1/4 (a-b)^2 -> d = |a-b| / 2.
  double a = 1.7, b = -0.3;
  CHECK(distance_from_objective(0.25 * (a - b) * (a - b)) == doctest::Approx(0.5 * std::abs(a - b)));
  CHECK_THROWS_AS(distance_from_objective(-1.0), std::invalid_argument);
}

TEST_CASE("distance_from_objective: 2-node antidiagonal vs zero network") {
  // Grid enumeration over the 1-parameter coupling family. Marginals are
  // uniform, so pi = [[x, .5-x], [.5-x, x]].
  PartitionedNetwork P, Q;
  P.parts.push_back({"p", 2, Vector::Constant(2, 0.5)});
  Q = P;
  Matrix anti(2, 2);
  anti << 0, 1, 1, 0;
  P.set_block(0, 0, anti);
  Q.set_block(0, 0, Matrix::Zero(2, 2));
  double best = std::numeric_limits<double>::infinity();
  for (int g = 0; g <= 1000; ++g) {
    double x = 0.5 * g / 1000.0;
    Matrix pi(2, 2);
    pi << x, 0.5 - x, 0.5 - x, x;
    PartitionedCoupling cpl;
    cpl.blocks.push_back(pi);
    best = std::min(best, oracle::full_objective(P, Q, cpl));
  }
  // Squared distortion is 1/2 for every coupling, so L = 1/8 and d = 0.35355.
  CHECK(best == doctest::Approx(0.125).epsilon(1e-12));
  double d = distance_from_objective(best);
  CHECK(d == doctest::Approx(0.5 * std::sqrt(0.5)).epsilon(1e-10));
}

TEST_CASE("evaluate_distance_p") {
  std::mt19937_64 rng(23);
  PartitionedNetwork P = random_network(rng, {3});
  PartitionedCoupling diag = diagonal_coupling(P, P);
  for (double p : {1.0, 2.0, 3.5}) CHECK(evaluate_distance_p(P, P, diag, p) == doctest::Approx(0.0));
  CHECK(evaluate_distance_p(P, P, diag, kInfiniteP) == doctest::Approx(0.0));

  PartitionedNetwork A = one_point_network(2.0), B = one_point_network(-1.0);
  PartitionedCoupling one;
  one.blocks.push_back(Matrix::Ones(1, 1));
  CHECK(evaluate_distance_p(A, B, one, kInfiniteP) == doctest::Approx(1.5));

  // p = 1 against a direct weighted-sum oracle.
  PartitionedNetwork X = random_network(rng, {3});
  PartitionedNetwork Y = random_network(rng, {3});
  PartitionedCoupling cpl;
  cpl.blocks.push_back(random_coupling(rng, X.parts[0].mu, Y.parts[0].mu));
  double direct = 0.0;
  const Matrix& w = *X.block(0, 0);
  const Matrix& wp = *Y.block(0, 0);
  const Matrix& pi = cpl.blocks[0];
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d)
          direct += std::abs(w(a, c) - wp(b, d)) * pi(a, b) * pi(c, d);
  CHECK(evaluate_distance_p(X, Y, cpl, 1.0) == doctest::Approx(0.5 * direct).epsilon(1e-12));
  CHECK_THROWS_AS(evaluate_distance_p(X, Y, cpl, 0.5), std::invalid_argument);
}

TEST_CASE("distance consistency: objective path equals p=2 evaluation") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    PartitionedNetwork P = random_network(rng, {3, 2});
    PartitionedNetwork Q = random_network(rng, {3, 2});
    PartitionedCoupling cpl;
    cpl.blocks.push_back(random_coupling(rng, P.parts[0].mu, Q.parts[0].mu));
    cpl.blocks.push_back(random_coupling(rng, P.parts[1].mu, Q.parts[1].mu));
    double d_obj = distance_from_objective(objective(P, Q, nullptr, cpl).total_L);
    double d_eval = evaluate_distance_p(P, Q, cpl, 2.0);
    CHECK(d_obj == doctest::Approx(d_eval).epsilon(1e-12));
  }
}

TEST_CASE("embed_add_singleton") {
  std::mt19937_64 rng(31);
  PartitionedNetwork P = random_network(rng, {2});
  PartitionedNetwork Q = embed_add_singleton(P);
  CHECK(Q.num_parts() == 2);
  CHECK(Q.part_size(1) == 1);
  CHECK(Q.parts[1].mu[0] == 1.0);
  CHECK(Q.block(0, 1) == nullptr);
  CHECK(Q.block(1, 1) == nullptr);
  CHECK((*Q.block(0, 0) - *P.block(0, 0)).cwiseAbs().maxCoeff() == 0.0);
  PartitionedNetwork R = embed_add_singleton(Q);  // chained composition
  CHECK(R.num_parts() == 3);
  R.validate();
}

TEST_CASE("embed_hypernetwork") {
  Matrix inc = Matrix::Ones(1, 1);
  PartitionedNetwork P = embed_hypernetwork(Vector::Ones(1), Vector::Ones(1), inc);
  CHECK(P.num_parts() == 2);
  CHECK((*P.block(0, 1))(0, 0) == 1.0);
  CHECK(P.block(0, 0) == nullptr);
  CHECK(P.block(1, 0) == nullptr);
  CHECK(P.block(1, 1) == nullptr);

  // Triangle hypergraph: 3 nodes, one hyperedge containing all of them.
  Matrix tri = Matrix::Ones(3, 1);
  PartitionedNetwork T =
      embed_hypernetwork(Vector::Constant(3, 1.0 / 3.0), Vector::Ones(1), tri);
  CHECK(T.block(0, 1)->rows() == 3);
  CHECK(T.block(0, 1)->cols() == 1);
  CHECK(T.block(0, 1)->minCoeff() == 1.0);

  CHECK_THROWS_AS(embed_hypernetwork(Vector::Ones(2), Vector::Ones(1), tri),
                  std::invalid_argument);
}

TEST_CASE("embed_augmented") {
  Matrix wx = Matrix::Constant(1, 1, 2.0), wxy = Matrix::Constant(1, 1, 3.0);
  PartitionedNetwork P = embed_augmented(wx, wxy, Vector::Ones(1), Vector::Ones(1));
  CHECK((*P.block(0, 0))(0, 0) == 2.0);
  CHECK((*P.block(0, 1))(0, 0) == 3.0);
  CHECK(P.block(1, 0) == nullptr);

  // omega_X = 0 reduces to the hypernetwork embedding (block stays absent).
  PartitionedNetwork H = embed_augmented(Matrix::Zero(1, 1), wxy, Vector::Ones(1), Vector::Ones(1));
  CHECK(H.block(0, 0) == nullptr);
}

TEST_CASE("partition_to_masked_labelled: mask pattern and k=1 passthrough") {
  std::mt19937_64 rng(37);
  PartitionedNetwork P = random_network(rng, {2, 1});
  auto prob = partition_to_masked_labelled(P, P);
  CHECK(prob.source.num_parts() == 1);
  CHECK(prob.source.part_size(0) == 3);
  CHECK(prob.source.parts[0].mu.sum() == doctest::Approx(1.0));
  const Matrix& C = prob.labels.blocks.at(0);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      bool cross = (a < 2) != (b < 2);
      CHECK(std::isinf(C(a, b)) == cross);
    }

  PartitionedNetwork single = random_network(rng, {3});
  auto p1 = partition_to_masked_labelled(single, single);
  CHECK(p1.labels.blocks.empty());
  CHECK((p1.source.parts[0].mu - single.parts[0].mu).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("masked coupling transfer preserves the objective with the lemma rescaling") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    PartitionedNetwork P = random_network(rng, {2, 3});
    PartitionedNetwork Q = random_network(rng, {3, 2});
    PartitionedCoupling cpl;
    cpl.blocks.push_back(random_coupling(rng, P.parts[0].mu, Q.parts[0].mu));
    cpl.blocks.push_back(random_coupling(rng, P.parts[1].mu, Q.parts[1].mu));
    auto prob = partition_to_masked_labelled(P, Q);
    Matrix masked_pi = partitioned_to_masked_coupling(P, Q, cpl);
    PartitionedCoupling single;
    single.blocks.push_back(masked_pi);
    double L1 = objective(prob.source, prob.target, &prob.labels, single).total_L;
    double Lk = objective(P, Q, nullptr, cpl).total_L;
    CHECK(4.0 * L1 == doctest::Approx(Lk).epsilon(1e-10));  // k^2 with k = 2
    PartitionedCoupling back = masked_to_partitioned_coupling(P, Q, masked_pi);
    for (int i = 0; i < 2; ++i)
      CHECK((back.blocks[static_cast<size_t>(i)] - cpl.blocks[static_cast<size_t>(i)])
                .cwiseAbs()
                .maxCoeff() <= 1e-15);
  }
}

TEST_CASE("kl divergence basics") {
  std::mt19937_64 rng(43);
  Vector a = testutil::random_positive(rng, 5);
  CHECK(kl_divergence(a, a) == doctest::Approx(0.0));
  Vector one = Vector::Ones(1), e = Vector::Constant(1, std::exp(1.0));
  CHECK(relative_entropy(one, e) == doctest::Approx(-1.0));
  CHECK(kl_divergence(one, e) == doctest::Approx(std::exp(1.0) - 2.0));
  // Support violation.
  Vector b = a;
  b[2] = 0.0;
  CHECK(std::isinf(kl_divergence(a, b)));
  CHECK(kl_divergence(b, a) < std::numeric_limits<double>::infinity());
}

TEST_CASE("kl product identity") {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    Vector a = testutil::random_positive(rng, 4), ap = testutil::random_positive(rng, 4);
    Vector b = testutil::random_positive(rng, 3), bp = testutil::random_positive(rng, 3);
    Matrix ab = a * b.transpose();
    Matrix apbp = ap * bp.transpose();
    double lhs = kl_divergence(ab, apbp);
    double rhs = b.sum() * kl_divergence(a, ap) + a.sum() * kl_divergence(b, bp) +
                 (a.sum() - ap.sum()) * (b.sum() - bp.sum());
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    double hlhs = relative_entropy(ab, apbp);
    double hrhs = b.sum() * relative_entropy(a, ap) + a.sum() * relative_entropy(b, bp);
    CHECK(hlhs == doctest::Approx(hrhs).epsilon(1e-10));
  }
}

TEST_CASE("network and coupling validation") {
  PartitionedNetwork P;
  CHECK_THROWS_AS(P.validate(), std::invalid_argument);
  P.parts.push_back({"p", 2, Vector::Constant(2, 0.5)});
  P.validate();
  P.parts[0].mu[0] = 0.7;
  CHECK_THROWS_AS(P.validate(), std::invalid_argument);  // mass != 1
  P.parts[0].mu[0] = 0.5;
  CHECK_THROWS_AS(P.set_block(0, 0, Matrix::Zero(1, 2)), std::invalid_argument);

  PartitionedNetwork U;
  U.mode = Mode::unbalanced;
  U.parts.push_back({"a", 1, Vector::Constant(1, 2.0)});
  U.parts.push_back({"b", 2, Vector::Constant(2, 1.0)});
  U.validate();
  U.parts[1].mu[0] = 0.5;
  CHECK_THROWS_AS(U.validate(), std::invalid_argument);  // unequal masses
}
