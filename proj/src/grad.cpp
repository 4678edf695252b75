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

#include "hyperlora/grad.hpp"

#include "hyperlora/random.hpp"

#include <algorithm>
#include <cmath>

namespace hyperlora::grad {

void LossContext::validate() const {
  if (!stack || !stack->weights) throw ConfigError("loss context has no encoder");
  const auto& enc = stack->config;
  hypernet.validate();
  ot.validate();
  if (hypernet.n_blocks != enc.n_blocks || hypernet.d_model != enc.d_model || hypernet.rank != enc.lora_rank) {
    throw ConfigError("hypernetwork output shape does not match the encoder");
  }
}

namespace {

struct Forward {
  ad::Tape tape;
  hypernet::HypernetVars vars;
  ad::Var loss;
};

void build(Forward& fw, const hypernet::HypernetWeights& hw, const typology::DialectFeatureVector& d,
           std::span<const transform::TokenSentence> batch, const ot::PointCloud& h_sae, const LossContext& ctx) {
  ctx.validate();
  if (batch.empty()) throw ArgumentError("loss needs a non-empty batch");
  hw.check_shapes(ctx.hypernet);
  auto& tape = fw.tape;
  const auto frozen = encoder::register_frozen(tape, *ctx.stack->weights);
  fw.vars = hypernet::register_params(tape, hw);
  const auto lora = hypernet::generate_on_tape(tape, fw.vars, d, ctx.hypernet);
  std::vector<ad::Var> parts;
  parts.reserve(batch.size());
  for (const auto& s : batch) parts.push_back(encoder::encode_on_tape(tape, *ctx.stack, frozen, &lora, s));
  const auto x = parts.size() == 1 ? parts.front() : tape.concat_rows(parts);
  const auto n = tape.value(x).rows();
  const Vector wx = Vector::Constant(n, 1.0 / static_cast<double>(n));
  fw.loss = ot::sinkhorn_divergence_on_tape(tape, x, wx, h_sae, ctx.ot);
  if (const auto& bad = tape.first_non_finite()) {
    throw NumericError("alignment loss is not finite; first non-finite value at " + *bad);
  }
}

}  // namespace

double loss_value(const hypernet::HypernetWeights& hw, const typology::DialectFeatureVector& d,
                  std::span<const transform::TokenSentence> batch, const ot::PointCloud& h_sae,
                  const LossContext& ctx) {
  Forward fw;
  build(fw, hw, d, batch, h_sae, ctx);
  return fw.tape.value(fw.loss)(0, 0);
}

GradReport loss_and_grad(const hypernet::HypernetWeights& hw, const typology::DialectFeatureVector& d,
                         std::span<const transform::TokenSentence> batch, const ot::PointCloud& h_sae,
                         const LossContext& ctx) {
  Forward fw;
  build(fw, hw, d, batch, h_sae, ctx);
  fw.tape.backward(fw.loss);
  GradReport report;
  report.loss = fw.tape.value(fw.loss)(0, 0);
  report.grads = hw;
  auto out = report.grads.tensors();
  for (std::size_t i = 0; i < out.size(); ++i) *out[i] = fw.tape.grad(fw.vars.tensors[i]);
  if (!report.grads.all_finite()) throw NumericError("gradient contains non-finite entries");
  return report;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

FdReport finite_diff_check(const hypernet::HypernetWeights& hw, const typology::DialectFeatureVector& d,
                           std::span<const transform::TokenSentence> batch, const ot::PointCloud& h_sae,
                           const LossContext& ctx, int n_probes, std::uint64_t seed, double step) {
  if (n_probes < 1) throw ArgumentError("finite_diff_check needs at least one probe");
  if (!(step > 0.0)) throw ArgumentError("finite-difference step must be positive");
  const auto report = loss_and_grad(hw, d, batch, h_sae, ctx);
  const auto total = hw.param_count();
  CounterRng rng(seed, 0x66645f636865636bULL);
  FdReport out;
  auto work = hw;
  for (int p = 0; p < n_probes; ++p) {
    auto flat = static_cast<Eigen::Index>(rng.below(total));
    std::size_t t = 0;
    auto tensors = work.tensors();
    while (flat >= tensors[t]->size()) {
      flat -= tensors[t]->size();
      ++t;
    }
    double& w = tensors[t]->data()[flat];
    const double original = w;
    const double hi = original + step;
    const double lo = original - step;
    w = hi;
    const double up = loss_value(work, d, batch, h_sae, ctx);
    w = lo;
    const double down = loss_value(work, d, batch, h_sae, ctx);
    w = original;
    FdProbe probe;
    probe.tensor = t;
    probe.index = flat;
    probe.analytic = report.grads.tensors()[t]->data()[flat];
    probe.numeric = (up - down) / (hi - lo);
    probe.rel_error = relative_error(probe.analytic, probe.numeric);
    out.max_rel_error = std::max(out.max_rel_error, probe.rel_error);
    out.probes.push_back(probe);
  }
  return out;
}

}  // namespace hyperlora::grad
