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

#include "hyperlora/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hyperlora::ot {

PointCloud::PointCloud(Matrix pts) : points(std::move(pts)) {
  const auto n = points.rows();
  weights = n > 0 ? Vector::Constant(n, 1.0 / static_cast<double>(n)) : Vector();
  validate();
}

PointCloud::PointCloud(Matrix pts, Vector w) : points(std::move(pts)), weights(std::move(w)) { validate(); }

void PointCloud::validate() const {
  if (points.rows() < 1 || points.cols() < 1) throw ValidationError("point cloud must contain at least one point");
  if (weights.size() != points.rows()) throw ValidationError("point cloud weights must match the number of points");
  if ((weights.array() < 0.0).any()) throw ValidationError("point cloud weights must be nonnegative");
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw ValidationError("point cloud weights must sum to 1");
  if (!points.allFinite()) throw NumericError("point cloud contains non-finite coordinates");
}

void OTConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (max_iters < 1 || unroll_iters < 1) throw ConfigError("iteration counts must be positive");
  if (unroll_iters > max_iters) throw ConfigError("unroll_iters must not exceed max_iters");
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  if (!(eps_decay > 0.0 && eps_decay < 1.0)) throw ConfigError("eps_decay must lie in (0, 1)");
}

void OTConfig::write_meta(std::map<std::string, std::string>& meta) const {
  meta["ot.epsilon"] = io::format_double(epsilon);
  meta["ot.max_iters"] = std::to_string(max_iters);
  meta["ot.unroll_iters"] = std::to_string(unroll_iters);
  meta["ot.tol"] = io::format_double(tol);
  meta["ot.cost"] = "squared-euclidean";
  meta["ot.eps_scaling"] = eps_scaling ? "1" : "0";
  meta["ot.eps_decay"] = io::format_double(eps_decay);
}

OTConfig OTConfig::read_meta(const std::map<std::string, std::string>& meta) {
  OTConfig cfg;
  cfg.epsilon = io::meta_double(meta, "ot.epsilon");
  cfg.max_iters = static_cast<int>(io::meta_int(meta, "ot.max_iters"));
  cfg.unroll_iters = static_cast<int>(io::meta_int(meta, "ot.unroll_iters"));
  cfg.tol = io::meta_double(meta, "ot.tol");
  if (io::meta_str(meta, "ot.cost") != "squared-euclidean") throw ConfigError("unknown cost kind");
  cfg.eps_scaling = io::meta_int(meta, "ot.eps_scaling") != 0;
  cfg.eps_decay = io::meta_double(meta, "ot.eps_decay");
  cfg.validate();
  return cfg;
}

Matrix cost_matrix(const PointCloud& a, const PointCloud& b, const OTConfig&) {
  if (a.dim() != b.dim()) {
    throw ArgumentError("cost_matrix: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                        std::to_string(b.dim()) + ")");
  }
  Matrix c(a.size(), b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    for (Eigen::Index j = 0; j < b.size(); ++j) c(i, j) = (a.points.row(i) - b.points.row(j)).squaredNorm();
  }
  if (!c.allFinite()) throw NumericError("cost matrix contains non-finite entries");
  return c;
}

double squared_diameter(std::initializer_list<const Matrix*> clouds) {
  RowVector lo, hi;
  for (const auto* m : clouds) {
    if (m->rows() == 0) continue;
    const RowVector mlo = m->colwise().minCoeff();
    const RowVector mhi = m->colwise().maxCoeff();
    if (lo.size() == 0) {
      lo = mlo;
      hi = mhi;
    } else {
      lo = lo.cwiseMin(mlo);
      hi = hi.cwiseMax(mhi);
    }
  }
  return lo.size() == 0 ? 0.0 : (hi - lo).squaredNorm();
}

namespace {

// out_i = -eps * log sum_j exp(logw_j + (g_j - C_ij) / eps); same arithmetic
// as the tape primitive.
Vector softmin(const Matrix& c, const Vector& g, const Vector& logw, double eps) {
  Vector out(c.rows());
  RowVector row(c.cols());
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    row = logw.transpose() + (g.transpose() - c.row(i)) / eps;
    const double m = row.maxCoeff();
    row = exp_shifted(row.array() - m);
    out(i) = -eps * (m + std::log(row.sum()));
  }
  return out;
}

Vector safe_log(const Vector& w) {
  return w.unaryExpr([](double v) { return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity(); });
}

class EpsSchedule {
 public:
  EpsSchedule(const OTConfig& cfg, double eps0)
      : target_(cfg.epsilon), decay_(cfg.eps_decay), current_(cfg.eps_scaling ? std::max(eps0, cfg.epsilon) : cfg.epsilon) {}
  double current() const { return current_; }
  bool at_target() const { return current_ <= target_; }
  void step() { current_ = std::max(target_, current_ * decay_); }

 private:
  double target_;
  double decay_;
  double current_;
};

Vector marginal(const Vector& w, const Vector& pot, const Vector& soft, double eps) {
  return (w.array() * ((pot - soft).array() / eps).exp()).matrix();
}

}  // namespace

namespace {

// Strict weak order on clouds used to canonicalize argument order.
bool cloud_less(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  if (a.dim() != b.dim()) return a.dim() < b.dim();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a.weights(i) != b.weights(i)) return a.weights(i) < b.weights(i);
  }
  for (Eigen::Index i = 0; i < a.points.size(); ++i) {
    if (a.points.data()[i] != b.points.data()[i]) return a.points.data()[i] < b.points.data()[i];
  }
  return false;
}

SinkhornResult solve(const PointCloud& a, const PointCloud& b, const OTConfig& cfg) {
  const Matrix c = cost_matrix(a, b, cfg);
  const Matrix ct = c.transpose();
  const Vector loga = safe_log(a.weights);
  const Vector logb = safe_log(b.weights);
  const double eps = cfg.epsilon;

  EpsSchedule sched(cfg, squared_diameter({&a.points, &b.points}));
  SinkhornResult res;
  res.f = Vector::Zero(a.size());
  res.g = Vector::Zero(b.size());
  Vector ft;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const double e = sched.current();
    ft = softmin(c, res.g, logb, e);
    // After a g-update the column marginals are exact, so only rows are checked.
    if (it > 0 && sched.at_target()) {
      const Vector r = marginal(a.weights, res.f, ft, e);
      if ((r - a.weights).cwiseAbs().maxCoeff() < cfg.tol) {
        res.converged = true;
        break;
      }
    }
    res.f = ft;
    res.g = softmin(ct, res.f, loga, e);
    sched.step();
    res.iterations = it + 1;
  }
  ft = softmin(c, res.g, logb, eps);
  const Vector gt = softmin(ct, res.f, loga, eps);
  const Vector r = marginal(a.weights, res.f, ft, eps);
  const Vector cc = marginal(b.weights, res.g, gt, eps);
  res.marginal_error = std::max((r - a.weights).cwiseAbs().maxCoeff(), (cc - b.weights).cwiseAbs().maxCoeff());
  res.value = r.dot(res.f) + cc.dot(res.g) + eps * (1.0 - r.sum());
  res.plan.resize(a.size(), b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      res.plan(i, j) = std::exp(loga(i) + logb(j) + (res.f(i) + res.g(j) - c(i, j)) / eps);
    }
  }
  if (!std::isfinite(res.value)) throw NumericError("Sinkhorn produced a non-finite value");
  return res;
}

}  // namespace

SinkhornResult sinkhorn_w(const PointCloud& a, const PointCloud& b, const OTConfig& cfg) {
  cfg.validate();
  a.validate();
  b.validate();
  if (a.dim() != b.dim()) throw ArgumentError("sinkhorn_w: dimension mismatch");
  if (!cloud_less(b, a)) return solve(a, b, cfg);
  // Solve the mirrored problem so that swapping arguments is exact.
  auto res = solve(b, a, cfg);
  std::swap(res.f, res.g);
  res.plan.transposeInPlace();
  return res;
}

double sinkhorn_divergence(const PointCloud& a, const PointCloud& b, const OTConfig& cfg) {
  const double wab = sinkhorn_w(a, b, cfg).value;
  const double waa = sinkhorn_w(a, a, cfg).value;
  const double wbb = sinkhorn_w(b, b, cfg).value;
  const double s = wab - 0.5 * waa - 0.5 * wbb;
  if (!std::isfinite(s)) throw NumericError("Sinkhorn divergence is not finite");
  return s;
}

double exact_ot(const PointCloud& a, const PointCloud& b) {
  a.validate();
  b.validate();
  const auto n = a.size();
  const auto m = b.size();
  if (n * m > 10000) throw ArgumentError("exact_ot is limited to N * M <= 10000");
  const Matrix c = cost_matrix(a, b);

  // Successive shortest paths with Johnson potentials. Nodes: sources
  // 0..n-1, sinks n..n+m-1, super source s = n+m, super sink t = n+m+1.
  constexpr double kTiny = 1e-15;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto s = n + m;
  const auto t = n + m + 1;
  const auto v = n + m + 2;
  Vector supply = a.weights;
  Vector demand = b.weights;
  Matrix flow = Matrix::Zero(n, m);
  Vector pot = Vector::Zero(v);
  Vector dist(v);
  std::vector<Eigen::Index> prev(static_cast<std::size_t>(v));
  std::vector<char> done(static_cast<std::size_t>(v));

  for (int guard = 0; guard < 1000000; ++guard) {
    dist.setConstant(kInf);
    std::fill(prev.begin(), prev.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    dist(s) = 0.0;
    auto relax = [&](Eigen::Index from, Eigen::Index to, double cost) {
      if (done[static_cast<std::size_t>(to)]) return;
      const double nd = dist(from) + cost + pot(from) - pot(to);
      if (nd < dist(to)) {
        dist(to) = nd;
        prev[static_cast<std::size_t>(to)] = from;
      }
    };
    for (;;) {
      Eigen::Index u = -1;
      for (Eigen::Index k = 0; k < v; ++k) {
        if (!done[static_cast<std::size_t>(k)] && dist(k) < kInf && (u < 0 || dist(k) < dist(u))) u = k;
      }
      if (u < 0) break;
      done[static_cast<std::size_t>(u)] = 1;
      if (u == s) {
        for (Eigen::Index i = 0; i < n; ++i) {
          if (supply(i) > kTiny) relax(s, i, 0.0);
        }
      } else if (u < n) {
        for (Eigen::Index j = 0; j < m; ++j) relax(u, n + j, c(u, j));
      } else if (u < s) {
        const auto j = u - n;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (flow(i, j) > kTiny) relax(u, i, -c(i, j));
        }
        if (demand(j) > kTiny) relax(u, t, 0.0);
      }
    }
    if (!(dist(t) < kInf)) break;
    for (Eigen::Index k = 0; k < v; ++k) pot(k) += std::min(dist(k), dist(t));

    double amount = kInf;
    for (Eigen::Index node = t; node != s;) {
      const auto p = prev[static_cast<std::size_t>(node)];
      if (p == s) {
        amount = std::min(amount, supply(node));
      } else if (node == t) {
        amount = std::min(amount, demand(p - n));
      } else if (p >= n) {
        amount = std::min(amount, flow(node, p - n));
      }
      node = p;
    }
    for (Eigen::Index node = t; node != s;) {
      const auto p = prev[static_cast<std::size_t>(node)];
      if (p == s) {
        supply(node) -= amount;
      } else if (node == t) {
        demand(p - n) -= amount;
      } else if (p < n) {
        flow(p, node - n) += amount;
      } else {
        flow(node, p - n) -= amount;
      }
      node = p;
    }
  }
  return flow.cwiseProduct(c).sum();
}

PointCloud load_cloud(const std::filesystem::path& path) {
  auto in = io::open_read(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError("not a number: '" + tok + "'", line_no);
      }
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError("inconsistent dimensionality", line_no);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no points", line_no);
  Matrix pts(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return PointCloud(std::move(pts));
}

// --- Differentiable variants ----------------------------------------------------

namespace {

ad::Var tape_marginal(ad::Tape& tape, ad::Var f, ad::Var ft, const Vector& w, double eps) {
  return tape.hadamard(tape.constant(w), tape.exp(tape.scale(tape.sub(f, ft), 1.0 / eps)));
}

}  // namespace

ad::Var sinkhorn_w_on_tape(ad::Tape& tape, ad::Var x, const Vector& wx, ad::Var y, const Vector& wy,
                           const OTConfig& cfg, double eps0) {
  cfg.validate();
  const auto raw = tape.sq_dist(x, y);
  const double shift = wx.dot(tape.value(raw).rowwise().minCoeff());
  const auto c = tape.add_scalar(raw, -shift);
  const auto ct = tape.transpose(c);
  const Vector loga = safe_log(wx);
  const Vector logb = safe_log(wy);
  auto f = tape.constant(Vector::Zero(wx.size()));
  auto g = tape.constant(Vector::Zero(wy.size()));
  EpsSchedule sched(cfg, eps0);
  for (int it = 0; it < cfg.unroll_iters; ++it) {
    const double e = sched.current();
    f = tape.softmin(c, g, logb, e);
    g = tape.softmin(ct, f, loga, e);
    sched.step();
  }
  const double eps = cfg.epsilon;
  const auto ft = tape.softmin(c, g, logb, eps);
  const auto gt = tape.softmin(ct, f, loga, eps);
  const auto r = tape_marginal(tape, f, ft, wx, eps);
  const auto cm = tape_marginal(tape, g, gt, wy, eps);
  const double k = wx.dot(tape.value(f).col(0));
  const auto rf = tape.sum(tape.hadamard(r, tape.add_scalar(f, -k)));
  const auto cg = tape.sum(tape.hadamard(cm, tape.add_scalar(g, k + shift - eps)));
  return tape.add_scalar(tape.add(rf, cg), eps);
}

ad::Var sinkhorn_divergence_on_tape(ad::Tape& tape, ad::Var x, const Vector& wx,
                                    const PointCloud& reference, const OTConfig& cfg) {
  reference.validate();
  if (tape.value(x).cols() != reference.dim()) throw ArgumentError("cloud dimensions differ");
  if (tape.value(x).rows() != wx.size()) throw ArgumentError("weights do not match the cloud");
  const double eps0 = squared_diameter({&reference.points});
  const auto y = tape.constant(reference.points);
  const auto wxy = sinkhorn_w_on_tape(tape, x, wx, y, reference.weights, cfg, eps0);
  const auto wxx = sinkhorn_w_on_tape(tape, x, wx, x, wx, cfg, eps0);
  const auto wyy = sinkhorn_w_on_tape(tape, y, reference.weights, y, reference.weights, cfg, eps0);
  return tape.sub(tape.sub(wxy, tape.scale(wxx, 0.5)), tape.scale(wyy, 0.5));
}

}  // namespace hyperlora::ot
