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

#include "hyperlora/hypernet.hpp"

#include "hyperlora/random.hpp"

#include <cmath>

namespace hyperlora::hypernet {

namespace {

Matrix uniform(CounterRng& rng, int rows, int cols, double limit) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  return m;
}

Mlp init_mlp(const HypernetConfig& cfg, std::uint64_t stream, bool zero_output) {
  CounterRng rng(cfg.seed, stream);
  Mlp m;
  m.w_in = uniform(rng, cfg.input_dim(), cfg.hidden_dim, 1.0 / std::sqrt(cfg.input_dim()));
  m.b_in = Matrix::Zero(1, cfg.hidden_dim);
  m.w_out = zero_output ? Matrix::Zero(cfg.hidden_dim, cfg.output_dim())
                        : uniform(rng, cfg.hidden_dim, cfg.output_dim(), 1.0 / std::sqrt(cfg.hidden_dim));
  m.b_out = Matrix::Zero(1, cfg.output_dim());
  return m;
}

Matrix mlp_forward(const Mlp& m, const Matrix& x) {
  Matrix h = (x * m.w_in).rowwise() + m.b_in.row(0);
  h = h.cwiseMax(0.0);
  return (h * m.w_out).rowwise() + m.b_out.row(0);
}

}  // namespace

const char* init_scheme_name(InitScheme s) {
  return s == InitScheme::ZeroOutput ? "zero-output" : "small-uniform";
}

InitScheme parse_init_scheme(std::string_view name) {
  if (name == "zero-output") return InitScheme::ZeroOutput;
  if (name == "small-uniform") return InitScheme::SmallUniform;
  throw ConfigError("unknown init scheme '" + std::string(name) + "'");
}

void HypernetConfig::validate() const {
  if (feature_dim < 1 || n_blocks < 1 || d_model < 1 || rank < 1) {
    throw ConfigError("hypernetwork dimensions must be positive");
  }
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be at least 1");
}

HypernetConfig HypernetConfig::for_encoder(const encoder::EncoderConfig& enc, int feature_dim) {
  HypernetConfig cfg;
  cfg.feature_dim = feature_dim;
  cfg.n_blocks = enc.n_blocks;
  cfg.d_model = enc.d_model;
  cfg.rank = enc.lora_rank;
  return cfg;
}

void HypernetConfig::write_meta(std::map<std::string, std::string>& meta) const {
  meta["hypernet.feature_dim"] = std::to_string(feature_dim);
  meta["hypernet.n_blocks"] = std::to_string(n_blocks);
  meta["hypernet.d_model"] = std::to_string(d_model);
  meta["hypernet.rank"] = std::to_string(rank);
  meta["hypernet.hidden_dim"] = std::to_string(hidden_dim);
  meta["hypernet.init"] = init_scheme_name(init);
  meta["hypernet.seed"] = std::to_string(seed);
}

HypernetConfig HypernetConfig::read_meta(const std::map<std::string, std::string>& meta) {
  HypernetConfig cfg;
  cfg.feature_dim = static_cast<int>(io::meta_int(meta, "hypernet.feature_dim"));
  cfg.n_blocks = static_cast<int>(io::meta_int(meta, "hypernet.n_blocks"));
  cfg.d_model = static_cast<int>(io::meta_int(meta, "hypernet.d_model"));
  cfg.rank = static_cast<int>(io::meta_int(meta, "hypernet.rank"));
  cfg.hidden_dim = static_cast<int>(io::meta_int(meta, "hypernet.hidden_dim"));
  auto it = meta.find("hypernet.init");
  if (it == meta.end()) throw ConfigError("missing metadata key 'hypernet.init'");
  cfg.init = parse_init_scheme(it->second);
  cfg.seed = static_cast<std::uint64_t>(io::meta_int(meta, "hypernet.seed"));
  cfg.validate();
  return cfg;
}

HypernetWeights HypernetWeights::init(const HypernetConfig& cfg) {
  cfg.validate();
  HypernetWeights w;
  w.down = init_mlp(cfg, 0, false);
  w.up = init_mlp(cfg, 1, cfg.init == InitScheme::ZeroOutput);
  return w;
}

HypernetWeights HypernetWeights::zeros_like(const HypernetWeights& w) {
  HypernetWeights z = w;
  for (auto* t : z.tensors()) t->setZero();
  return z;
}

std::array<Matrix*, 8> HypernetWeights::tensors() {
  return {&down.w_in, &down.b_in, &down.w_out, &down.b_out, &up.w_in, &up.b_in, &up.w_out, &up.b_out};
}

std::array<const Matrix*, 8> HypernetWeights::tensors() const {
  return {&down.w_in, &down.b_in, &down.w_out, &down.b_out, &up.w_in, &up.b_in, &up.w_out, &up.b_out};
}

const std::array<const char*, 8>& HypernetWeights::tensor_names() {
  static const std::array<const char*, 8> names{"down/w_in", "down/b_in", "down/w_out", "down/b_out",
                                                "up/w_in",   "up/b_in",   "up/w_out",   "up/b_out"};
  return names;
}

std::size_t HypernetWeights::param_count() const {
  std::size_t n = 0;
  for (const auto* t : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

bool HypernetWeights::all_finite() const {
  for (const auto* t : tensors()) {
    if (!t->allFinite()) return false;
  }
  return true;
}

void HypernetWeights::check_shapes(const HypernetConfig& cfg) const {
  const std::array<std::pair<int, int>, 8> shapes{{{cfg.input_dim(), cfg.hidden_dim},
                                                   {1, cfg.hidden_dim},
                                                   {cfg.hidden_dim, cfg.output_dim()},
                                                   {1, cfg.output_dim()},
                                                   {cfg.input_dim(), cfg.hidden_dim},
                                                   {1, cfg.hidden_dim},
                                                   {cfg.hidden_dim, cfg.output_dim()},
                                                   {1, cfg.output_dim()}}};
  const auto ts = tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i]->rows() != shapes[i].first || ts[i]->cols() != shapes[i].second) {
      throw ConfigError(std::string("hypernetwork tensor ") + tensor_names()[i] + " has the wrong shape");
    }
  }
}

std::size_t param_count(const HypernetConfig& cfg) {
  cfg.validate();
  const auto in = static_cast<std::size_t>(cfg.input_dim());
  const auto hid = static_cast<std::size_t>(cfg.hidden_dim);
  const auto out = static_cast<std::size_t>(cfg.output_dim());
  return 2 * (in * hid + hid + hid * out + out);
}

RowVector positional_input(const typology::DialectFeatureVector& d, int block, Role role,
                           const HypernetConfig& cfg) {
  if (block < 0 || block >= cfg.n_blocks) {
    throw ArgumentError("block " + std::to_string(block) + " out of range [0, " +
                        std::to_string(cfg.n_blocks) + ")");
  }
  const auto rates = d.rates();
  if (static_cast<int>(rates.size()) != cfg.feature_dim) {
    throw ConfigError("feature vector has " + std::to_string(rates.size()) + " entries, hypernetwork expects " +
                      std::to_string(cfg.feature_dim));
  }
  RowVector x = RowVector::Zero(cfg.input_dim());
  for (std::size_t i = 0; i < rates.size(); ++i) x(static_cast<Eigen::Index>(i)) = rates[i];
  x(cfg.feature_dim + 2 * block + static_cast<int>(role)) = 1.0;
  return x;
}

Matrix hypernet_inputs(const typology::DialectFeatureVector& d, const HypernetConfig& cfg) {
  Matrix x(2 * cfg.n_blocks, cfg.input_dim());
  for (int k = 0; k < cfg.n_blocks; ++k) {
    x.row(2 * k) = positional_input(d, k, Role::Query, cfg);
    x.row(2 * k + 1) = positional_input(d, k, Role::Value, cfg);
  }
  return x;
}

encoder::LoRAParamSet generate_lora(const HypernetWeights& hw, const typology::DialectFeatureVector& d,
                                    const HypernetConfig& cfg) {
  cfg.validate();
  hw.check_shapes(cfg);
  const Matrix x = hypernet_inputs(d, cfg);
  const Matrix down = mlp_forward(hw.down, x);
  const Matrix up = mlp_forward(hw.up, x);
  auto as = [](const Matrix& m, Eigen::Index row, int rows, int cols) {
    return Matrix(Eigen::Map<const Matrix>(m.row(row).data(), rows, cols));
  };
  encoder::LoRAParamSet out;
  for (int k = 0; k < cfg.n_blocks; ++k) {
    out.blocks.push_back({as(down, 2 * k, cfg.d_model, cfg.rank), as(up, 2 * k, cfg.rank, cfg.d_model),
                          as(down, 2 * k + 1, cfg.d_model, cfg.rank), as(up, 2 * k + 1, cfg.rank, cfg.d_model)});
  }
  return out;
}

HypernetVars register_params(ad::Tape& tape, const HypernetWeights& hw) {
  HypernetVars v;
  const auto ts = hw.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) v.tensors[i] = tape.param(*ts[i]);
  return v;
}

encoder::LoraVars generate_on_tape(ad::Tape& tape, const HypernetVars& vars,
                                   const typology::DialectFeatureVector& d, const HypernetConfig& cfg) {
  cfg.validate();
  const auto x = tape.constant(hypernet_inputs(d, cfg));
  auto mlp = [&](std::size_t base) {
    const auto& t = vars.tensors;
    auto h = tape.relu(tape.add_row(tape.matmul(x, t[base]), t[base + 1]));
    return tape.add_row(tape.matmul(h, t[base + 2]), t[base + 3]);
  };
  const auto down = mlp(0);
  const auto up = mlp(4);
  auto as = [&](ad::Var m, int row, int rows, int cols) {
    return tape.reshape(tape.slice_rows(m, row, 1), rows, cols);
  };
  encoder::LoraVars out;
  for (int k = 0; k < cfg.n_blocks; ++k) {
    out.push_back({as(down, 2 * k, cfg.d_model, cfg.rank), as(up, 2 * k, cfg.rank, cfg.d_model),
                   as(down, 2 * k + 1, cfg.d_model, cfg.rank), as(up, 2 * k + 1, cfg.rank, cfg.d_model)});
  }
  return out;
}

void write_checkpoint(io::Checkpoint& ckpt, const HypernetWeights& hw, const HypernetConfig& cfg) {
  cfg.write_meta(ckpt.meta);
  const auto ts = hw.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    ckpt.add(std::string("hypernet/") + HypernetWeights::tensor_names()[i], *ts[i]);
  }
}

HypernetWeights read_checkpoint(const io::Checkpoint& ckpt, const HypernetConfig& cfg) {
  HypernetWeights hw;
  auto ts = hw.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    *ts[i] = ckpt.matrix(std::string("hypernet/") + HypernetWeights::tensor_names()[i]);
  }
  hw.check_shapes(cfg);
  if (!hw.all_finite()) throw NumericError("hypernetwork checkpoint contains non-finite values");
  return hw;
}

}  // namespace hyperlora::hypernet
