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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hyperlora::ad {

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  Add,
  Sub,
  AddRow,
  Scale,
  AddScalar,
  Relu,
  Gelu,
  SoftmaxRows,
  LayerNormRows,
  Softmin,
  Exp,
  Hadamard,
  Sum,
  SliceCols,
  ConcatCols,
  SliceRows,
  ConcatRows,
  Reshape,
  Transpose,
  GatherRows,
  SqDist,
};

const char* op_name(Op op);

/// Reverse-mode tape over dense row-major matrices.
///
/// Leaves are either constants (never differentiated) or parameters.
/// Every other node records its inputs and enough cached state for its
/// vector-Jacobian product. Column vectors are N x 1 matrices; scalars 1 x 1.
class Tape {
 public:
  Var constant(Matrix value);
  Var param(Matrix value);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  Op op(Var v) const { return nodes_.at(v.id).op; }
  std::size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  /// x (R x C) + row (1 x C) broadcast over rows.
  Var add_row(Var x, Var row);
  Var scale(Var x, double s);
  Var add_scalar(Var x, double s);
  Var relu(Var x);
  /// Exact (erf) GELU.
  Var gelu(Var x);
  Var softmax_rows(Var x);
  /// Per-row normalization; gamma and beta are 1 x C.
  Var layer_norm_rows(Var x, Var gamma, Var beta, double eps);
  /// out_i = -eps * log sum_j exp(logw_j + (g_j - C_ij) / eps); C is N x M,
  /// g is M x 1, logw a constant M-vector.
  Var softmin(Var cost, Var g, const Vector& logw, double eps);
  Var exp(Var x);
  Var hadamard(Var a, Var b);
  Var sum(Var x);
  Var slice_cols(Var x, Eigen::Index start, Eigen::Index count);
  Var concat_cols(std::span<const Var> parts);
  Var slice_rows(Var x, Eigen::Index start, Eigen::Index count);
  Var concat_rows(std::span<const Var> parts);
  /// Row-major reinterpretation.
  Var reshape(Var x, Eigen::Index rows, Eigen::Index cols);
  Var transpose(Var x);
  Var gather_rows(Var table, std::vector<Eigen::Index> ids);
  /// C_ij = ||x_i - y_j||^2.
  Var sq_dist(Var x, Var y);

  /// Accumulates d(output)/d(node) for every node that depends on a
  /// parameter. output must be 1 x 1.
  void backward(Var output);
  /// Gradient from the last backward(); zeros if the node was not reached.
  Matrix grad(Var v) const;

  /// Overwrites a leaf value. Call replay() afterwards to refresh the graph.
  void set_leaf(Var v, Matrix value);
  /// Recomputes every non-leaf node from its inputs, in recording order.
  void replay();

  /// "op#index" of the first node whose value contained NaN or Inf.
  const std::optional<std::string>& first_non_finite() const { return first_bad_; }

 private:
  struct Node {
    Op op = Op::Leaf;
    std::uint32_t in[2] = {UINT32_MAX, UINT32_MAX};
    std::uint32_t in3 = UINT32_MAX;
    std::vector<std::uint32_t> many;
    std::vector<Eigen::Index> ids;
    double s = 0.0;
    Eigen::Index i0 = 0, i1 = 0;
    bool needs_grad = false;
    Matrix value;
    Matrix aux;
    RowVector aux_row;
    Vector consts;
  };

  Var push(Node node);
  void forward(Node& node);
  void check_finite(const Node& node, std::size_t index);
  const Matrix& in_value(const Node& node, int k) const { return nodes_[node.in[k]].value; }

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
  std::optional<std::string> first_bad_;
};

}  // namespace hyperlora::ad
