// Copyright 2026 The HyperLoRA-Desk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hyperlora/ot.hpp"
#include "hyperlora/random.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>

using namespace hyperlora;
using namespace hyperlora::ot;

namespace {

Matrix random_points(Eigen::Index n, Eigen::Index d, CounterRng& rng) {
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

/// Uniform-weight OT by brute force: replicate both clouds to lcm(N, M)
/// points and minimise the assignment cost over every permutation.
double brute_force_ot(const Matrix& a, const Matrix& b) {
  const auto n = a.rows(), m = b.rows();
  const auto l = std::lcm(n, m);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(l));
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double cost = 0.0;
    for (Eigen::Index i = 0; i < l; ++i) {
      cost += (a.row(i / (l / n)) - b.row(perm[static_cast<std::size_t>(i)] / (l / m))).squaredNorm();
    }
    best = std::min(best, cost / static_cast<double>(l));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

OTConfig tight(double eps) {
  OTConfig cfg;
  cfg.epsilon = eps;
  cfg.max_iters = 20000;
  cfg.tol = 1e-12;
  return cfg;
}

}  // namespace

TEST_CASE("cost matrix equals the expanded dot-product form") {
  CounterRng rng(1);
  const PointCloud a(random_points(5, 4, rng)), b(random_points(7, 4, rng));
  const Matrix c = cost_matrix(a, b);
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index j = 0; j < 7; ++j) {
      const double expanded = a.points.row(i).squaredNorm() + b.points.row(j).squaredNorm() -
                              2.0 * a.points.row(i).dot(b.points.row(j));
      CHECK(c(i, j) == doctest::Approx(expanded).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(cost_matrix(a, PointCloud(random_points(3, 2, rng))), ArgumentError);
}

TEST_CASE("exact OT agrees with permutation brute force") {
  CounterRng rng(2);
  for (auto [n, m] : {std::pair<Eigen::Index, Eigen::Index>{6, 6}, {5, 5}, {3, 2}, {2, 6}, {4, 6}, {1, 4}}) {
    CAPTURE(n);
    CAPTURE(m);
    const Matrix a = random_points(n, 3, rng), b = random_points(m, 3, rng);
    CHECK(exact_ot(PointCloud(a), PointCloud(b)) == doctest::Approx(brute_force_ot(a, b)).epsilon(1e-10));
  }
  const PointCloud big(Matrix::Zero(101, 2));
  CHECK_THROWS_AS(exact_ot(big, big), ArgumentError);
}

TEST_CASE("entropic value decreases towards exact OT as epsilon shrinks") {
  CounterRng rng(3);
  const PointCloud a(random_points(6, 2, rng)), b(random_points(5, 2, rng));
  const double exact = exact_ot(a, b);
  double previous = INFINITY;
  for (double eps : {1.0, 0.1, 0.01, 0.001}) {
    const auto r = sinkhorn_w(a, b, tight(eps));
    CHECK(r.converged);
    CHECK(r.value < previous);
    CHECK(r.value >= exact - 1e-9);
    previous = r.value;
  }
  CHECK(previous == doctest::Approx(exact).epsilon(0.01));
}

TEST_CASE("plan marginals, symmetry and debiasing") {
  CounterRng rng(4);
  Vector wa(6);
  wa << 0.1, 0.2, 0.3, 0.1, 0.2, 0.1;
  const PointCloud a(random_points(6, 3, rng), wa), b(random_points(4, 3, rng));
  const auto r = sinkhorn_w(a, b, tight(0.2));
  CAPTURE(r.marginal_error);
  REQUIRE(r.converged);
  CHECK((r.plan.rowwise().sum() - a.weights).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((r.plan.colwise().sum().transpose() - b.weights).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(r.plan.minCoeff() >= 0.0);
  // Primal value recomputed from the plan: <P, C> + eps * KL(P | a x b).
  const Matrix c = cost_matrix(a, b);
  double primal = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      const double p = r.plan(i, j);
      const double q = a.weights(i) * b.weights(j);
      primal += p * c(i, j) + 0.2 * (p * std::log(p / q) - p + q);
    }
  }
  CHECK(r.value == doctest::Approx(primal).epsilon(1e-8));

  CHECK(std::abs(sinkhorn_w(a, b).value - sinkhorn_w(b, a).value) <= 1e-10);
  CHECK(std::abs(sinkhorn_divergence(a, a)) <= 1e-8);
  CHECK(sinkhorn_divergence(a, b) > 0.0);
}

TEST_CASE("non-finite inputs are numeric errors") {
  Matrix p = Matrix::Zero(3, 2);
  p(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(sinkhorn_w(PointCloud(p), PointCloud(Matrix::Zero(2, 2))), Error);
  OTConfig bad;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("tape value converges to the solver value") {
  CounterRng rng(5);
  const PointCloud a(random_points(5, 3, rng)), b(random_points(6, 3, rng));
  auto cfg = tight(0.05);
  cfg.unroll_iters = 400;
  const auto solved = sinkhorn_w(a, b, cfg);
  ad::Tape tape;
  const auto x = tape.param(a.points);
  const auto y = tape.constant(b.points);
  const double eps0 = squared_diameter({&a.points, &b.points});
  const auto v = sinkhorn_w_on_tape(tape, x, a.weights, y, b.weights, cfg, eps0);
  CHECK(tape.value(v)(0, 0) == doctest::Approx(solved.value).epsilon(1e-9));
}

TEST_CASE("point cloud files") {
  const auto dir = test::scratch_dir("ot-cloud");
  {
    std::ofstream out(dir / "a.txt");
    out << "# two points\n1 2 3\n\n4.5 -1 0  # trailing\n";
    std::ofstream bad(dir / "bad.txt");
    bad << "1 2\n3\n";
  }
  const auto a = load_cloud(dir / "a.txt");
  REQUIRE(a.size() == 2);
  CHECK(a.dim() == 3);
  CHECK(a.points(1, 0) == 4.5);
  CHECK(a.weights(0) == 0.5);
  CHECK_THROWS_AS(load_cloud(dir / "bad.txt"), ParseError);
}
