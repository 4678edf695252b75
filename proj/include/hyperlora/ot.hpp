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

#pragma once

#include "hyperlora/common.hpp"
#include "hyperlora/tape.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace hyperlora::ot {

enum class CostKind { SquaredEuclidean };

/// Weighted point cloud; weights lie on the simplex.
struct PointCloud {
  Matrix points;
  Vector weights;

  PointCloud() = default;
  /// Uniform weights.
  explicit PointCloud(Matrix pts);
  PointCloud(Matrix pts, Vector w);

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
  void validate() const;
};

struct OTConfig {
  double epsilon = 0.05;
  int max_iters = 500;
  int unroll_iters = 50;
  double tol = 1e-9;
  CostKind cost = CostKind::SquaredEuclidean;
  /// epsilon-scaling: eps_k = max(epsilon, eps0 * eps_decay^k), eps0 = squared diameter.
  bool eps_scaling = true;
  double eps_decay = 0.5;

  void validate() const;
  void write_meta(std::map<std::string, std::string>& meta) const;
  static OTConfig read_meta(const std::map<std::string, std::string>& meta);
};

struct SinkhornResult {
  double value = 0.0;
  Vector f;
  Vector g;
  Matrix plan;
  int iterations = 0;
  bool converged = false;
  double marginal_error = 0.0;
};

Matrix cost_matrix(const PointCloud& a, const PointCloud& b, const OTConfig& cfg = {});

/// Squared length of the bounding-box diagonal of the union of clouds.
double squared_diameter(std::initializer_list<const Matrix*> clouds);

/// Entropic OT value <pi, C> + eps * KL(pi | a x b), log-domain Sinkhorn.
SinkhornResult sinkhorn_w(const PointCloud& a, const PointCloud& b, const OTConfig& cfg = {});

/// W(a, b) - W(a, a) / 2 - W(b, b) / 2.
double sinkhorn_divergence(const PointCloud& a, const PointCloud& b, const OTConfig& cfg = {});

/// Unregularized optimal transport cost (successive shortest paths).
/// Requires size(a) * size(b) <= 10000.
double exact_ot(const PointCloud& a, const PointCloud& b);

/// Whitespace-separated rows of numbers, one point per line; '#' starts a comment.
PointCloud load_cloud(const std::filesystem::path& path);

// Differentiable variants with exactly cfg.unroll_iters iterations.

/// x is N x D on the tape; y is a tape variable or constant of M x D.
ad::Var sinkhorn_w_on_tape(ad::Tape& tape, ad::Var x, const Vector& wx, ad::Var y, const Vector& wy,
                           const OTConfig& cfg, double eps0);

/// S_eps between a cloud on the tape and a constant reference cloud.
/// eps0 is taken from the reference cloud.
ad::Var sinkhorn_divergence_on_tape(ad::Tape& tape, ad::Var x, const Vector& wx,
                                    const PointCloud& reference, const OTConfig& cfg);

}  // namespace hyperlora::ot
