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

#include "hyperlora/tape.hpp"

#include <cmath>
#include <numbers>

namespace hyperlora::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::AddRow: return "add_row";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::Relu: return "relu";
    case Op::Gelu: return "gelu";
    case Op::SoftmaxRows: return "softmax_rows";
    case Op::LayerNormRows: return "layer_norm_rows";
    case Op::Softmin: return "softmin";
    case Op::Exp: return "exp";
    case Op::Hadamard: return "hadamard";
    case Op::Sum: return "sum";
    case Op::SliceCols: return "slice_cols";
    case Op::ConcatCols: return "concat_cols";
    case Op::SliceRows: return "slice_rows";
    case Op::ConcatRows: return "concat_rows";
    case Op::Reshape: return "reshape";
    case Op::Transpose: return "transpose";
    case Op::GatherRows: return "gather_rows";
    case Op::SqDist: return "sq_dist";
  }
  return "?";
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ArgumentError(std::string("tape: ") + what);
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_slope(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::push(Node node) {
  const auto index = nodes_.size();
  require(index < UINT32_MAX, "too many nodes");
  if (node.op != Op::Leaf) {
    auto flag = [&](std::uint32_t id) {
      if (id != UINT32_MAX) node.needs_grad = node.needs_grad || nodes_[id].needs_grad;
    };
    flag(node.in[0]);
    flag(node.in[1]);
    flag(node.in3);
    for (auto id : node.many) flag(id);
    forward(node);
  }
  check_finite(node, index);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(index)};
}

void Tape::check_finite(const Node& node, std::size_t index) {
  if (!first_bad_ && !node.value.allFinite()) {
    first_bad_ = std::string(op_name(node.op)) + "#" + std::to_string(index);
  }
}

void Tape::forward(Node& n) {
  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::MatMul:
      n.value.noalias() = in_value(n, 0) * in_value(n, 1);
      break;
    case Op::Add:
      n.value = in_value(n, 0) + in_value(n, 1);
      break;
    case Op::Sub:
      n.value = in_value(n, 0) - in_value(n, 1);
      break;
    case Op::AddRow:
      n.value = in_value(n, 0).rowwise() + in_value(n, 1).row(0);
      break;
    case Op::Scale:
      n.value = in_value(n, 0) * n.s;
      break;
    case Op::AddScalar:
      n.value = in_value(n, 0).array() + n.s;
      break;
    case Op::Relu:
      n.value = in_value(n, 0).cwiseMax(0.0);
      break;
    case Op::Gelu:
      n.value = in_value(n, 0).unaryExpr(&gelu_value);
      break;
    case Op::SoftmaxRows: {
      const auto& x = in_value(n, 0);
      n.value.resize(x.rows(), x.cols());
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double m = x.row(r).maxCoeff();
        n.value.row(r) = exp_shifted(x.row(r).array() - m);
        n.value.row(r) /= n.value.row(r).sum();
      }
      break;
    }
    case Op::LayerNormRows: {
      const auto& x = in_value(n, 0);
      const auto& gamma = in_value(n, 1);
      const auto& beta = nodes_[n.in3].value;
      const auto cols = static_cast<double>(x.cols());
      n.aux.resize(x.rows(), x.cols());
      n.aux_row.resize(x.rows());
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).sum() / cols;
        const double var = (x.row(r).array() - mean).square().sum() / cols;
        const double inv = 1.0 / std::sqrt(var + n.s);
        n.aux_row(r) = inv;
        n.aux.row(r) = (x.row(r).array() - mean) * inv;
      }
      n.value = (n.aux.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array();
      break;
    }
    case Op::Softmin: {
      const auto& c = in_value(n, 0);
      const auto& g = in_value(n, 1);
      const double eps = n.s;
      n.aux.resize(c.rows(), c.cols());
      n.value.resize(c.rows(), 1);
      for (Eigen::Index i = 0; i < c.rows(); ++i) {
        auto row = n.aux.row(i);
        row = n.consts.transpose() + (g.col(0).transpose() - c.row(i)) / eps;
        const double m = row.maxCoeff();
        row = exp_shifted(row.array() - m);
        const double z = row.sum();
        row /= z;
        n.value(i, 0) = -eps * (m + std::log(z));
      }
      break;
    }
    case Op::Exp:
      n.value = in_value(n, 0).array().exp();
      break;
    case Op::Hadamard:
      n.value = in_value(n, 0).cwiseProduct(in_value(n, 1));
      break;
    case Op::Sum:
      n.value = Matrix::Constant(1, 1, in_value(n, 0).sum());
      break;
    case Op::SliceCols:
      n.value = in_value(n, 0).middleCols(n.i0, n.i1);
      break;
    case Op::SliceRows:
      n.value = in_value(n, 0).middleRows(n.i0, n.i1);
      break;
    case Op::ConcatCols: {
      Eigen::Index cols = 0;
      const Eigen::Index rows = nodes_[n.many.front()].value.rows();
      for (auto id : n.many) cols += nodes_[id].value.cols();
      n.value.resize(rows, cols);
      Eigen::Index at = 0;
      for (auto id : n.many) {
        const auto& part = nodes_[id].value;
        n.value.middleCols(at, part.cols()) = part;
        at += part.cols();
      }
      break;
    }
    case Op::ConcatRows: {
      Eigen::Index rows = 0;
      const Eigen::Index cols = nodes_[n.many.front()].value.cols();
      for (auto id : n.many) rows += nodes_[id].value.rows();
      n.value.resize(rows, cols);
      Eigen::Index at = 0;
      for (auto id : n.many) {
        const auto& part = nodes_[id].value;
        n.value.middleRows(at, part.rows()) = part;
        at += part.rows();
      }
      break;
    }
    case Op::Reshape: {
      const auto& x = in_value(n, 0);
      n.value = Eigen::Map<const Matrix>(x.data(), n.i0, n.i1);
      break;
    }
    case Op::Transpose:
      n.value = in_value(n, 0).transpose();
      break;
    case Op::GatherRows: {
      const auto& t = in_value(n, 0);
      n.value.resize(static_cast<Eigen::Index>(n.ids.size()), t.cols());
      for (std::size_t k = 0; k < n.ids.size(); ++k) {
        n.value.row(static_cast<Eigen::Index>(k)) = t.row(n.ids[k]);
      }
      break;
    }
    case Op::SqDist: {
      const auto& x = in_value(n, 0);
      const auto& y = in_value(n, 1);
      n.value.resize(x.rows(), y.rows());
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < y.rows(); ++j) {
          n.value(i, j) = (x.row(i) - y.row(j)).squaredNorm();
        }
      }
      break;
    }
  }
}

Var Tape::matmul(Var a, Var b) {
  require(value(a).cols() == value(b).rows(), "matmul shape mismatch");
  Node n;
  n.op = Op::MatMul;
  n.in[0] = a.id;
  n.in[1] = b.id;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
          "add shape mismatch");
  Node n;
  n.op = Op::Add;
  n.in[0] = a.id;
  n.in[1] = b.id;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
          "sub shape mismatch");
  Node n;
  n.op = Op::Sub;
  n.in[0] = a.id;
  n.in[1] = b.id;
  return push(std::move(n));
}

Var Tape::add_row(Var x, Var row) {
  require(value(row).rows() == 1 && value(row).cols() == value(x).cols(), "add_row shape mismatch");
  Node n;
  n.op = Op::AddRow;
  n.in[0] = x.id;
  n.in[1] = row.id;
  return push(std::move(n));
}

Var Tape::scale(Var x, double s) {
  Node n;
  n.op = Op::Scale;
  n.in[0] = x.id;
  n.s = s;
  return push(std::move(n));
}

Var Tape::add_scalar(Var x, double s) {
  Node n;
  n.op = Op::AddScalar;
  n.in[0] = x.id;
  n.s = s;
  return push(std::move(n));
}

Var Tape::relu(Var x) {
  Node n;
  n.op = Op::Relu;
  n.in[0] = x.id;
  return push(std::move(n));
}

Var Tape::gelu(Var x) {
  Node n;
  n.op = Op::Gelu;
  n.in[0] = x.id;
  return push(std::move(n));
}

Var Tape::softmax_rows(Var x) {
  Node n;
  n.op = Op::SoftmaxRows;
  n.in[0] = x.id;
  return push(std::move(n));
}

Var Tape::layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  require(value(gamma).rows() == 1 && value(gamma).cols() == value(x).cols() &&
              value(beta).rows() == 1 && value(beta).cols() == value(x).cols(),
          "layer_norm shape mismatch");
  Node n;
  n.op = Op::LayerNormRows;
  n.in[0] = x.id;
  n.in[1] = gamma.id;
  n.in3 = beta.id;
  n.s = eps;
  return push(std::move(n));
}

Var Tape::softmin(Var cost, Var g, const Vector& logw, double eps) {
  require(eps > 0.0, "softmin needs eps > 0");
  require(value(g).cols() == 1 && value(g).rows() == value(cost).cols() && logw.size() == value(g).rows(),
          "softmin shape mismatch");
  Node n;
  n.op = Op::Softmin;
  n.in[0] = cost.id;
  n.in[1] = g.id;
  n.consts = logw;
  n.s = eps;
  return push(std::move(n));
}

Var Tape::exp(Var x) {
  Node n;
  n.op = Op::Exp;
  n.in[0] = x.id;
  return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
          "hadamard shape mismatch");
  Node n;
  n.op = Op::Hadamard;
  n.in[0] = a.id;
  n.in[1] = b.id;
  return push(std::move(n));
}

Var Tape::sum(Var x) {
  Node n;
  n.op = Op::Sum;
  n.in[0] = x.id;
  return push(std::move(n));
}

Var Tape::slice_cols(Var x, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= value(x).cols(), "slice_cols out of range");
  Node n;
  n.op = Op::SliceCols;
  n.in[0] = x.id;
  n.i0 = start;
  n.i1 = count;
  return push(std::move(n));
}

Var Tape::slice_rows(Var x, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= value(x).rows(), "slice_rows out of range");
  Node n;
  n.op = Op::SliceRows;
  n.in[0] = x.id;
  n.i0 = start;
  n.i1 = count;
  return push(std::move(n));
}

Var Tape::concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat of nothing");
  Node n;
  n.op = Op::ConcatCols;
  for (auto p : parts) {
    require(value(p).rows() == value(parts.front()).rows(), "concat_cols row mismatch");
    n.many.push_back(p.id);
  }
  return push(std::move(n));
}

Var Tape::concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat of nothing");
  Node n;
  n.op = Op::ConcatRows;
  for (auto p : parts) {
    require(value(p).cols() == value(parts.front()).cols(), "concat_rows column mismatch");
    n.many.push_back(p.id);
  }
  return push(std::move(n));
}

Var Tape::reshape(Var x, Eigen::Index rows, Eigen::Index cols) {
  require(rows * cols == value(x).size(), "reshape size mismatch");
  Node n;
  n.op = Op::Reshape;
  n.in[0] = x.id;
  n.i0 = rows;
  n.i1 = cols;
  return push(std::move(n));
}

Var Tape::transpose(Var x) {
  Node n;
  n.op = Op::Transpose;
  n.in[0] = x.id;
  return push(std::move(n));
}

Var Tape::gather_rows(Var table, std::vector<Eigen::Index> ids) {
  for (auto i : ids) require(i >= 0 && i < value(table).rows(), "gather index out of range");
  Node n;
  n.op = Op::GatherRows;
  n.in[0] = table.id;
  n.ids = std::move(ids);
  return push(std::move(n));
}

Var Tape::sq_dist(Var x, Var y) {
  require(value(x).cols() == value(y).cols(), "sq_dist dimension mismatch");
  Node n;
  n.op = Op::SqDist;
  n.in[0] = x.id;
  n.in[1] = y.id;
  return push(std::move(n));
}

void Tape::set_leaf(Var v, Matrix value) {
  auto& n = nodes_.at(v.id);
  require(n.op == Op::Leaf, "set_leaf on a non-leaf");
  require(n.value.rows() == value.rows() && n.value.cols() == value.cols(), "set_leaf shape mismatch");
  n.value = std::move(value);
}

void Tape::replay() {
  first_bad_.reset();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    forward(nodes_[i]);
    check_finite(nodes_[i], i);
  }
}

Matrix Tape::grad(Var v) const {
  const auto& n = nodes_.at(v.id);
  if (v.id < grads_.size() && grads_[v.id].size() != 0) return grads_[v.id];
  return Matrix::Zero(n.value.rows(), n.value.cols());
}

void Tape::backward(Var output) {
  require(value(output).size() == 1, "backward needs a scalar output");
  grads_.assign(nodes_.size(), Matrix());
  grads_[output.id] = Matrix::Ones(1, 1);

  auto acc = [this](std::uint32_t id, const auto& g) {
    if (id == UINT32_MAX || !nodes_[id].needs_grad) return;
    auto& slot = grads_[id];
    if (slot.size() == 0) {
      slot = g;
    } else {
      slot += g;
    }
  };

  for (std::size_t k = output.id + 1; k-- > 0;) {
    const auto& n = nodes_[k];
    if (!n.needs_grad || n.op == Op::Leaf || grads_[k].size() == 0) continue;
    const Matrix& g = grads_[k];
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul:
        if (nodes_[n.in[0]].needs_grad) acc(n.in[0], Matrix(g * in_value(n, 1).transpose()));
        if (nodes_[n.in[1]].needs_grad) acc(n.in[1], Matrix(in_value(n, 0).transpose() * g));
        break;
      case Op::Add:
        acc(n.in[0], g);
        acc(n.in[1], g);
        break;
      case Op::Sub:
        acc(n.in[0], g);
        acc(n.in[1], Matrix(-g));
        break;
      case Op::AddRow:
        acc(n.in[0], g);
        acc(n.in[1], Matrix(g.colwise().sum()));
        break;
      case Op::Scale:
        acc(n.in[0], Matrix(g * n.s));
        break;
      case Op::AddScalar:
        acc(n.in[0], g);
        break;
      case Op::Relu:
        acc(n.in[0], Matrix((in_value(n, 0).array() > 0.0).select(g, 0.0)));
        break;
      case Op::Gelu:
        acc(n.in[0], Matrix(g.cwiseProduct(in_value(n, 0).unaryExpr(&gelu_slope))));
        break;
      case Op::SoftmaxRows: {
        const auto& y = n.value;
        const Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
        acc(n.in[0], Matrix(y.cwiseProduct(Matrix(g.colwise() - dots))));
        break;
      }
      case Op::LayerNormRows: {
        const auto& xhat = n.aux;
        const auto& gamma = in_value(n, 1);
        if (nodes_[n.in[0]].needs_grad) {
          const Matrix dxhat = g.array().rowwise() * gamma.row(0).array();
          const auto cols = static_cast<double>(g.cols());
          Matrix dx(g.rows(), g.cols());
          for (Eigen::Index r = 0; r < g.rows(); ++r) {
            const double m1 = dxhat.row(r).sum() / cols;
            const double m2 = dxhat.row(r).dot(xhat.row(r)) / cols;
            dx.row(r) = n.aux_row(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
          }
          acc(n.in[0], dx);
        }
        acc(n.in[1], Matrix(g.cwiseProduct(xhat).colwise().sum()));
        acc(n.in3, Matrix(g.colwise().sum()));
        break;
      }
      case Op::Softmin: {
        const auto& p = n.aux;
        if (nodes_[n.in[0]].needs_grad) acc(n.in[0], Matrix(p.array().colwise() * g.col(0).array()));
        if (nodes_[n.in[1]].needs_grad) acc(n.in[1], Matrix(-(p.transpose() * g)));
        break;
      }
      case Op::Exp:
        acc(n.in[0], Matrix(g.cwiseProduct(n.value)));
        break;
      case Op::Hadamard:
        if (nodes_[n.in[0]].needs_grad) acc(n.in[0], Matrix(g.cwiseProduct(in_value(n, 1))));
        if (nodes_[n.in[1]].needs_grad) acc(n.in[1], Matrix(g.cwiseProduct(in_value(n, 0))));
        break;
      case Op::Sum: {
        const auto& x = in_value(n, 0);
        acc(n.in[0], Matrix(Matrix::Constant(x.rows(), x.cols(), g(0, 0))));
        break;
      }
      case Op::SliceCols: {
        const auto& x = in_value(n, 0);
        Matrix full = Matrix::Zero(x.rows(), x.cols());
        full.middleCols(n.i0, n.i1) = g;
        acc(n.in[0], full);
        break;
      }
      case Op::SliceRows: {
        const auto& x = in_value(n, 0);
        Matrix full = Matrix::Zero(x.rows(), x.cols());
        full.middleRows(n.i0, n.i1) = g;
        acc(n.in[0], full);
        break;
      }
      case Op::ConcatCols: {
        Eigen::Index at = 0;
        for (auto id : n.many) {
          const auto cols = nodes_[id].value.cols();
          acc(id, Matrix(g.middleCols(at, cols)));
          at += cols;
        }
        break;
      }
      case Op::ConcatRows: {
        Eigen::Index at = 0;
        for (auto id : n.many) {
          const auto rows = nodes_[id].value.rows();
          acc(id, Matrix(g.middleRows(at, rows)));
          at += rows;
        }
        break;
      }
      case Op::Reshape: {
        const auto& x = in_value(n, 0);
        acc(n.in[0], Matrix(Eigen::Map<const Matrix>(g.data(), x.rows(), x.cols())));
        break;
      }
      case Op::Transpose:
        acc(n.in[0], Matrix(g.transpose()));
        break;
      case Op::GatherRows: {
        const auto& t = in_value(n, 0);
        Matrix full = Matrix::Zero(t.rows(), t.cols());
        for (std::size_t r = 0; r < n.ids.size(); ++r) full.row(n.ids[r]) += g.row(static_cast<Eigen::Index>(r));
        acc(n.in[0], full);
        break;
      }
      case Op::SqDist: {
        const auto& x = in_value(n, 0);
        const auto& y = in_value(n, 1);
        if (nodes_[n.in[0]].needs_grad) {
          const Eigen::VectorXd rs = g.rowwise().sum();
          acc(n.in[0], Matrix(2.0 * (Matrix(x.array().colwise() * rs.array()) - g * y)));
        }
        if (nodes_[n.in[1]].needs_grad) {
          const Eigen::VectorXd cs = g.colwise().sum().transpose();
          acc(n.in[1], Matrix(2.0 * (Matrix(y.array().colwise() * cs.array()) - g.transpose() * x)));
        }
        break;
      }
    }
  }
}

}  // namespace hyperlora::ad
