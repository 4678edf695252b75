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
#include "hyperlora/encoder.hpp"
#include "hyperlora/io.hpp"
#include "hyperlora/tape.hpp"
#include "hyperlora/typology.hpp"

#include <array>
#include <cstdint>

namespace hyperlora::hypernet {

enum class InitScheme { ZeroOutput, SmallUniform };
enum class Role { Query = 0, Value = 1 };

const char* init_scheme_name(InitScheme s);
InitScheme parse_init_scheme(std::string_view name);

struct HypernetConfig {
  int feature_dim = 0;
  int n_blocks = 2;
  int d_model = 32;
  int rank = 4;
  int hidden_dim = 16;
  InitScheme init = InitScheme::ZeroOutput;
  std::uint64_t seed = 0;

  int input_dim() const { return feature_dim + 2 * n_blocks; }
  int output_dim() const { return d_model * rank; }
  void validate() const;

  static HypernetConfig for_encoder(const encoder::EncoderConfig& enc, int feature_dim);
  void write_meta(std::map<std::string, std::string>& meta) const;
  static HypernetConfig read_meta(const std::map<std::string, std::string>& meta);
};

/// x -> ReLU(x W_in + b_in) W_out + b_out. Biases are 1 x n matrices.
struct Mlp {
  Matrix w_in;
  Matrix b_in;
  Matrix w_out;
  Matrix b_out;
};

/// g (down-projections) and g' (up-projections).
struct HypernetWeights {
  Mlp down;
  Mlp up;

  static HypernetWeights init(const HypernetConfig& cfg);
  static HypernetWeights zeros_like(const HypernetWeights& w);

  /// Fixed order: down.{w_in,b_in,w_out,b_out}, up.{w_in,b_in,w_out,b_out}.
  std::array<Matrix*, 8> tensors();
  std::array<const Matrix*, 8> tensors() const;
  static const std::array<const char*, 8>& tensor_names();

  std::size_t param_count() const;
  bool all_finite() const;
  void check_shapes(const HypernetConfig& cfg) const;
};

/// Trainable scalars in both networks for a configuration.
std::size_t param_count(const HypernetConfig& cfg);

/// [d ; onehot(2 * block + role)].
RowVector positional_input(const typology::DialectFeatureVector& d, int block, Role role,
                           const HypernetConfig& cfg);

/// All 2 * n_blocks positional inputs stacked in one-hot index order.
Matrix hypernet_inputs(const typology::DialectFeatureVector& d, const HypernetConfig& cfg);

encoder::LoRAParamSet generate_lora(const HypernetWeights& hw, const typology::DialectFeatureVector& d,
                                    const HypernetConfig& cfg);

struct HypernetVars {
  std::array<ad::Var, 8> tensors;
};

HypernetVars register_params(ad::Tape& tape, const HypernetWeights& hw);

encoder::LoraVars generate_on_tape(ad::Tape& tape, const HypernetVars& vars,
                                   const typology::DialectFeatureVector& d, const HypernetConfig& cfg);

void write_checkpoint(io::Checkpoint& ckpt, const HypernetWeights& hw, const HypernetConfig& cfg);
HypernetWeights read_checkpoint(const io::Checkpoint& ckpt, const HypernetConfig& cfg);

}  // namespace hyperlora::hypernet
