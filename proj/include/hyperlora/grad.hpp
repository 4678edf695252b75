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

#include "hyperlora/encoder.hpp"
#include "hyperlora/hypernet.hpp"
#include "hyperlora/ot.hpp"
#include "hyperlora/transform.hpp"
#include "hyperlora/typology.hpp"

#include <span>
#include <vector>

namespace hyperlora::grad {

/// Everything besides the trainable weights that the alignment loss depends on.
struct LossContext {
  const encoder::EncoderStack* stack = nullptr;
  hypernet::HypernetConfig hypernet;
  ot::OTConfig ot;

  void validate() const;
};

/// Gradients shaped exactly like the hypernetwork weights. The frozen
/// encoder has no entry here: it is registered on the tape as constants.
struct GradReport {
  double loss = 0.0;
  hypernet::HypernetWeights grads;
};

/// S_eps(batch_encode(batch, generate_lora(hw, d)), h_sae) with
/// ctx.ot.unroll_iters unrolled Sinkhorn iterations, and its gradient.
GradReport loss_and_grad(const hypernet::HypernetWeights& hw, const typology::DialectFeatureVector& d,
                         std::span<const transform::TokenSentence> batch, const ot::PointCloud& h_sae,
                         const LossContext& ctx);

/// Forward pass only.
double loss_value(const hypernet::HypernetWeights& hw, const typology::DialectFeatureVector& d,
                  std::span<const transform::TokenSentence> batch, const ot::PointCloud& h_sae,
                  const LossContext& ctx);

struct FdProbe {
  std::size_t tensor = 0;
  Eigen::Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct FdReport {
  double max_rel_error = 0.0;
  std::vector<FdProbe> probes;
};

/// Relative error with max(|a|, |n|, 1e-8) in the denominator.
double relative_error(double analytic, double numeric);

/// Compares n_probes randomly chosen gradient entries against central
/// differences (loss(w + h) - loss(w - h)) / 2h.
FdReport finite_diff_check(const hypernet::HypernetWeights& hw, const typology::DialectFeatureVector& d,
                           std::span<const transform::TokenSentence> batch, const ot::PointCloud& h_sae,
                           const LossContext& ctx, int n_probes, std::uint64_t seed, double step = 1e-6);

}  // namespace hyperlora::grad
