// Copyright 2026 The seqsynth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "seqsynth/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "seqsynth/errors.hpp"

namespace seqsynth::ad {

namespace {

constexpr double kSoftplusLinearThreshold = 30.0;

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string(op) + ": shape mismatch " + shape(a.value()) + " vs " +
                        shape(b.value()));
  }
}

void require_same_graph(const Var& a, const Var& b) {
  if (a.graph() != b.graph()) throw ContractError("operands belong to different graphs");
}

// log(1 + exp(r)) without overflow.
double log1pexp(double r) {
  if (r > kSoftplusLinearThreshold) return r + std::exp(-r);
  return std::log1p(std::exp(r));
}

}  // namespace

// ---------------------------------------------------------------------------
// Scalar kernels

double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x, double beta) {
  if (!(beta > 0)) throw DomainError("softplus: beta must be positive");
  const double r = x / beta;
  if (r > kSoftplusLinearThreshold) return x + beta * std::exp(-r);
  return beta * std::log1p(std::exp(r));
}

double softplus_grad(double x, double beta) {
  if (!(beta > 0)) throw DomainError("softplus: beta must be positive");
  return sigmoid(x / beta);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) throw DomainError("softmax of an empty vector");
  Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) throw DomainError("log_softmax of an empty vector");
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

// ---------------------------------------------------------------------------
// Parameters

Parameter::Parameter(std::string name, Matrix initial)
    : value(std::move(initial)), grad(Matrix::Zero(value.rows(), value.cols())),
      name_(std::move(name)) {}

Parameter& ParameterSet::add(std::string name, Index rows, Index cols) {
  if (by_name_.count(name)) throw ContractError("duplicate parameter name: " + name);
  params_.push_back(std::make_unique<Parameter>(name, Matrix::Zero(rows, cols)));
  Parameter* p = params_.back().get();
  by_name_.emplace(std::move(name), p);
  return *p;
}

Parameter& ParameterSet::at(std::string_view name) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ContractError("unknown parameter: " + std::string(name));
  return *it->second;
}

const Parameter& ParameterSet::at(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ContractError("unknown parameter: " + std::string(name));
  return *it->second;
}

bool ParameterSet::contains(std::string_view name) const {
  return by_name_.find(name) != by_name_.end();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad.setZero(p->value.rows(), p->value.cols());
}

double ParameterSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

std::vector<Matrix> ParameterSet::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterSet::restore(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) throw ContractError("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) params_[i]->value = values[i];
}

// ---------------------------------------------------------------------------
// Graph

const Matrix& Var::value() const { return graph_->value_of(id_); }
const Matrix& Var::grad() const { return graph_->grad_of(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ContractError("scalar() on a " + shape(v) + " node");
  return v(0, 0);
}

const Matrix& Graph::value_of(int id) const {
  const Node& n = nodes_[id];
  return n.param ? n.param->value : n.value;
}

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.op = "constant";
  return push(std::move(n));
}

Var Graph::param(Parameter& p) {
  Node n;
  n.param = &p;
  n.op = "parameter";
  n.needs_grad = true;
  return push(std::move(n));
}

Var Graph::record(Matrix value, const char* op, std::initializer_list<Var> parents,
                  BackwardFn backward) {
  return record(std::move(value), op, std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
}

Var Graph::record(Matrix value, const char* op, std::span<const Var> parents,
                  BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  for (const Var& p : parents) {
    if (p.graph_ != this) throw ContractError(std::string(op) + ": operand from another graph");
    n.needs_grad = n.needs_grad || nodes_[p.id_].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Matrix& Graph::grad_buffer(const Var& v) {
  Node& n = nodes_[v.id_];
  if (!n.has_grad) {
    const Matrix& val = value_of(v.id_);
    n.grad = Matrix::Zero(val.rows(), val.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::accumulate(const Var& v, const Matrix& g) {
  if (!nodes_[v.id_].needs_grad) return;
  grad_buffer(v) += g;
}

void Graph::backward(Var loss) {
  if (loss.graph_ != this) throw ContractError("backward: loss belongs to another graph");
  const Matrix& lv = value_of(loss.id_);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("backward: loss must be scalar, got " + shape(lv));
  }
  if (!std::isfinite(lv(0, 0))) {
    for (int i = 0; i <= loss.id_; ++i) {
      if (!value_of(i).allFinite()) {
        throw PoisonedGradientError("non-finite value first produced by node #" +
                                    std::to_string(i) + " (" + nodes_[i].op + ")");
      }
    }
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  grad_buffer(loss)(0, 0) = 1.0;

  for (int i = loss.id_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.needs_grad) continue;
    if (!n.grad.allFinite()) {
      throw PoisonedGradientError("non-finite gradient at node #" + std::to_string(i) + " (" +
                                  n.op + ")");
    }
    if (n.param) {
      n.param->grad += n.grad;
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise and linear ops

Var add(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape(a, b, "add");
  Graph& g = *a.graph();
  return g.record(a.value() + b.value(), "add", {a, b}, [a, b](Graph& g, const Matrix& d) {
    g.accumulate(a, d);
    g.accumulate(b, d);
  });
}

Var sub(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape(a, b, "sub");
  Graph& g = *a.graph();
  return g.record(a.value() - b.value(), "sub", {a, b}, [a, b](Graph& g, const Matrix& d) {
    g.accumulate(a, d);
    g.accumulate(b, -d);
  });
}

Var mul(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape(a, b, "mul");
  Graph& g = *a.graph();
  return g.record(a.value().cwiseProduct(b.value()), "mul", {a, b},
                  [a, b](Graph& g, const Matrix& d) {
                    if (g.needs_grad(a)) g.accumulate(a, d.cwiseProduct(b.value()));
                    if (g.needs_grad(b)) g.accumulate(b, d.cwiseProduct(a.value()));
                  });
}

Var scale(Var a, double s) {
  Graph& g = *a.graph();
  return g.record(a.value() * s, "scale", {a},
                  [a, s](Graph& g, const Matrix& d) { g.accumulate(a, d * s); });
}

Var add_scalar(Var a, double s) {
  Graph& g = *a.graph();
  return g.record((a.value().array() + s).matrix(), "add_scalar", {a},
                  [a](Graph& g, const Matrix& d) { g.accumulate(a, d); });
}

Var add_row(Var a, Var row) {
  require_same_graph(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ContractError("add_row: expected 1x" + std::to_string(a.cols()) + " row, got " +
                        shape(row.value()));
  }
  Graph& g = *a.graph();
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return g.record(std::move(out), "add_row", {a, row}, [a, row](Graph& g, const Matrix& d) {
    g.accumulate(a, d);
    if (g.needs_grad(row)) g.accumulate(row, d.colwise().sum());
  });
}

Var mul_const(Var a, const Matrix& m) {
  if (a.rows() != m.rows() || a.cols() != m.cols()) {
    throw ContractError("mul_const: shape mismatch " + shape(a.value()) + " vs " + shape(m));
  }
  Graph& g = *a.graph();
  return g.record(a.value().cwiseProduct(m), "mul_const", {a},
                  [a, m](Graph& g, const Matrix& d) { g.accumulate(a, d.cwiseProduct(m)); });
}

Var matmul(Var a, Var b) {
  require_same_graph(a, b);
  if (a.cols() != b.rows()) {
    throw ContractError("matmul: " + shape(a.value()) + " * " + shape(b.value()));
  }
  Graph& g = *a.graph();
  return g.record(a.value() * b.value(), "matmul", {a, b}, [a, b](Graph& g, const Matrix& d) {
    if (g.needs_grad(a)) g.grad_buffer(a).noalias() += d * b.value().transpose();
    if (g.needs_grad(b)) g.grad_buffer(b).noalias() += a.value().transpose() * d;
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_graph(a, b);
  if (a.cols() != b.cols()) {
    throw ContractError("matmul_nt: " + shape(a.value()) + " * (" + shape(b.value()) + ")^T");
  }
  Graph& g = *a.graph();
  return g.record(a.value() * b.value().transpose(), "matmul_nt", {a, b},
                  [a, b](Graph& g, const Matrix& d) {
                    if (g.needs_grad(a)) g.grad_buffer(a).noalias() += d * b.value();
                    if (g.needs_grad(b)) g.grad_buffer(b).noalias() += d.transpose() * a.value();
                  });
}

// ---------------------------------------------------------------------------
// Structural ops

Var slice_rows(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw ContractError("slice_rows out of range");
  }
  Graph& g = *a.graph();
  return g.record(a.value().middleRows(start, count), "slice_rows", {a},
                  [a, start, count](Graph& g, const Matrix& d) {
                    g.grad_buffer(a).middleRows(start, count) += d;
                  });
}

Var slice_cols(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ContractError("slice_cols out of range");
  }
  Graph& g = *a.graph();
  return g.record(a.value().middleCols(start, count), "slice_cols", {a},
                  [a, start, count](Graph& g, const Matrix& d) {
                    g.grad_buffer(a).middleCols(start, count) += d;
                  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows of nothing");
  Graph& g = *parts.front().graph();
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ContractError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return g.record(std::move(out), "concat_rows", parts, [saved](Graph& g, const Matrix& d) {
    Index r = 0;
    for (const Var& p : saved) {
      const Index n = p.rows();
      if (g.needs_grad(p)) g.grad_buffer(p) += d.middleRows(r, n);
      r += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols of nothing");
  Graph& g = *parts.front().graph();
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ContractError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return g.record(std::move(out), "concat_cols", parts, [saved](Graph& g, const Matrix& d) {
    Index c = 0;
    for (const Var& p : saved) {
      const Index n = p.cols();
      if (g.needs_grad(p)) g.grad_buffer(p) += d.middleCols(c, n);
      c += n;
    }
  });
}

Var gather_rows(Var a, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw ContractError("gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  Graph& g = *a.graph();
  return g.record(std::move(out), "gather_rows", {a}, [a, idx](Graph& g, const Matrix& d) {
    Matrix& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += d.row(static_cast<Index>(i));
  });
}

Var pick(Var a, std::span<const Index> rows, std::span<const Index> cols) {
  if (rows.size() != cols.size()) throw ContractError("pick: index lists differ in length");
  Matrix out(static_cast<Index>(rows.size()), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows() || cols[i] < 0 || cols[i] >= a.cols()) {
      throw ContractError("pick: index out of range");
    }
    out(static_cast<Index>(i), 0) = a.value()(rows[i], cols[i]);
  }
  std::vector<Index> r(rows.begin(), rows.end());
  std::vector<Index> c(cols.begin(), cols.end());
  Graph& g = *a.graph();
  return g.record(std::move(out), "pick", {a}, [a, r, c](Graph& g, const Matrix& d) {
    Matrix& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < r.size(); ++i) ga(r[i], c[i]) += d(static_cast<Index>(i), 0);
  });
}

// ---------------------------------------------------------------------------
// Normalizations

Var softmax_rows(Var a, const Mask* allowed) {
  const Matrix& x = a.value();
  if (allowed && (allowed->rows() != x.rows() || allowed->cols() != x.cols())) {
    throw ContractError("softmax_rows: mask shape mismatch");
  }
  Matrix p(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    bool any = false, finite = true;
    for (Index j = 0; j < x.cols(); ++j) {
      if (allowed && !(*allowed)(i, j)) continue;
      any = true;
      finite = finite && std::isfinite(x(i, j));
      m = std::max(m, x(i, j));
    }
    if (!any) throw ContractError("softmax_rows: row with no allowed entry");
    if (!finite) {
      // Diverged inputs: let NaN reach the loss so training can name it.
      p.row(i).setConstant(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    double s = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
      const double e = (!allowed || (*allowed)(i, j)) ? std::exp(x(i, j) - m) : 0.0;
      p(i, j) = e;
      s += e;
    }
    p.row(i) /= s;
  }
  Graph& g = *a.graph();
  Matrix saved = p;
  return g.record(std::move(p), "softmax_rows", {a}, [a, saved](Graph& g, const Matrix& d) {
    const Eigen::VectorXd dots = d.cwiseProduct(saved).rowwise().sum();
    Matrix dx = saved.cwiseProduct(d.colwise() - dots);
    g.accumulate(a, dx);
  });
}

Var log_softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    const double lse = m + std::log((x.row(i).array() - m).exp().sum());
    out.row(i) = x.row(i).array() - lse;
  }
  Graph& g = *a.graph();
  Matrix probs = out.array().exp().matrix();
  return g.record(std::move(out), "log_softmax_rows", {a},
                  [a, probs](Graph& g, const Matrix& d) {
                    const Eigen::VectorXd totals = d.rowwise().sum();
                    Matrix dx = d - (probs.array().colwise() * totals.array()).matrix();
                    g.accumulate(a, dx);
                  });
}

Var layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  const Index n = x.rows();
  const Index c = x.cols();
  if (gain.rows() != 1 || gain.cols() != c || bias.rows() != 1 || bias.cols() != c) {
    throw ContractError("layer_norm_rows: gain/bias must be 1x" + std::to_string(c));
  }
  Matrix xhat(n, c);
  Eigen::VectorXd inv_std(n);
  const Matrix& xv = x.value();
  for (Index i = 0; i < n; ++i) {
    const double mean = xv.row(i).mean();
    const double var = (xv.row(i).array() - mean).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mean) * inv_std(i);
  }
  Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  Graph& g = *x.graph();
  return g.record(std::move(out), "layer_norm_rows", {x, gain, bias},
                  [x, gain, bias, xhat, inv_std, c](Graph& g, const Matrix& d) {
                    if (g.needs_grad(gain)) {
                      g.accumulate(gain, d.cwiseProduct(xhat).colwise().sum());
                    }
                    if (g.needs_grad(bias)) g.accumulate(bias, d.colwise().sum());
                    if (g.needs_grad(x)) {
                      Matrix dxhat = d.array().rowwise() * gain.value().row(0).array();
                      const Eigen::VectorXd m1 = dxhat.rowwise().mean();
                      const Eigen::VectorXd m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
                      Matrix dx = dxhat;
                      dx.colwise() -= m1;
                      dx -= (xhat.array().colwise() * m2.array()).matrix();
                      dx = (dx.array().colwise() * inv_std.array()).matrix();
                      g.accumulate(x, dx);
                    }
                    (void)c;
                  });
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities

namespace {

template <class F, class DF>
Var pointwise(Var a, const char* op, F f, DF df) {
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr(f);
  Graph& g = *a.graph();
  return g.record(std::move(out), op, {a}, [a, df](Graph& g, const Matrix& d) {
    g.accumulate(a, d.cwiseProduct(a.value().unaryExpr(df)));
  });
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Var gelu(Var a) {
  return pointwise(
      a, "gelu",
      [](double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); },
      [](double x) {
        const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
        return 0.5 * (1.0 + t) +
               0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
      });
}

Var tanh(Var a) {
  const Matrix out = a.value().array().tanh().matrix();
  Graph& g = *a.graph();
  return g.record(out, "tanh", {a}, [a, out](Graph& g, const Matrix& d) {
    g.accumulate(a, d.cwiseProduct((1.0 - out.array().square()).matrix()));
  });
}

Var sigmoid(Var a) {
  const Matrix out = a.value().unaryExpr([](double x) { return ad::sigmoid(x); });
  Graph& g = *a.graph();
  return g.record(out, "sigmoid", {a}, [a, out](Graph& g, const Matrix& d) {
    g.accumulate(a, d.cwiseProduct((out.array() * (1.0 - out.array())).matrix()));
  });
}

Var exp(Var a) {
  const Matrix out = a.value().array().exp().matrix();
  Graph& g = *a.graph();
  return g.record(out, "exp", {a},
                  [a, out](Graph& g, const Matrix& d) { g.accumulate(a, d.cwiseProduct(out)); });
}

Var log(Var a) {
  Graph& g = *a.graph();
  return g.record(a.value().array().log().matrix(), "log", {a},
                  [a](Graph& g, const Matrix& d) {
                    g.accumulate(a, d.cwiseQuotient(a.value()));
                  });
}

Var square(Var a) {
  Graph& g = *a.graph();
  return g.record(a.value().array().square().matrix(), "square", {a},
                  [a](Graph& g, const Matrix& d) {
                    g.accumulate(a, 2.0 * d.cwiseProduct(a.value()));
                  });
}

Var softplus(Var a) {
  return pointwise(
      a, "softplus", [](double x) { return ad::softplus(x, 1.0); },
      [](double x) { return ad::sigmoid(x); });
}

Var softplus_cols(Var a, Var log_beta, double beta_min, double beta_max) {
  require_same_graph(a, log_beta);
  const Index n = a.rows();
  const Index c = a.cols();
  if (log_beta.rows() != 1 || log_beta.cols() != c) {
    throw ContractError("softplus_cols: log_beta must be 1x" + std::to_string(c));
  }
  Eigen::RowVectorXd beta(c);
  std::vector<bool> clamped(static_cast<std::size_t>(c));
  for (Index j = 0; j < c; ++j) {
    const double raw = std::exp(log_beta.value()(0, j));
    beta(j) = std::clamp(raw, beta_min, beta_max);
    clamped[static_cast<std::size_t>(j)] = raw < beta_min || raw > beta_max;
  }
  Matrix out(n, c);
  const Matrix& x = a.value();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < c; ++j) out(i, j) = ad::softplus(x(i, j), beta(j));
  }
  Graph& g = *a.graph();
  return g.record(
      std::move(out), "softplus_cols", {a, log_beta},
      [a, log_beta, beta, clamped](Graph& g, const Matrix& d) {
        const Matrix& x = a.value();
        const Index n = x.rows();
        const Index c = x.cols();
        Matrix dx(n, c);
        Matrix dlb = Matrix::Zero(1, c);
        for (Index j = 0; j < c; ++j) {
          const double b = beta(j);
          for (Index i = 0; i < n; ++i) {
            const double r = x(i, j) / b;
            const double s = ad::sigmoid(r);
            dx(i, j) = d(i, j) * s;
            // d/d(beta) of beta * log1p(exp(x / beta)), times d(beta)/d(log_beta) = beta.
            dlb(0, j) += d(i, j) * (log1pexp(r) - r * s) * b;
          }
          if (clamped[static_cast<std::size_t>(j)]) dlb(0, j) = 0.0;
        }
        g.accumulate(a, dx);
        g.accumulate(log_beta, dlb);
      });
}

// ---------------------------------------------------------------------------
// Reductions

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  Graph& g = *a.graph();
  const Index r = a.rows();
  const Index c = a.cols();
  return g.record(std::move(out), "sum", {a}, [a, r, c](Graph& g, const Matrix& d) {
    g.grad_buffer(a).array() += d(0, 0);
    (void)r;
    (void)c;
  });
}

Var row_sum(Var a) {
  Graph& g = *a.graph();
  return g.record(a.value().rowwise().sum(), "row_sum", {a}, [a](Graph& g, const Matrix& d) {
    Matrix& ga = g.grad_buffer(a);
    ga.colwise() += d.col(0);
  });
}

Var weighted_sum(Var a, const Matrix& w) {
  if (a.rows() != w.rows() || a.cols() != w.cols()) {
    throw ContractError("weighted_sum: shape mismatch " + shape(a.value()) + " vs " + shape(w));
  }
  Matrix out(1, 1);
  out(0, 0) = a.value().cwiseProduct(w).sum();
  Graph& g = *a.graph();
  return g.record(std::move(out), "weighted_sum", {a},
                  [a, w](Graph& g, const Matrix& d) { g.accumulate(a, w * d(0, 0)); });
}

// ---------------------------------------------------------------------------
// Finite differences

FiniteDiffReport finite_diff_check(const std::function<Var(Graph&)>& loss_fn,
                                   ParameterSet& params, double h) {
  auto evaluate = [&]() {
    Graph g;
    const double v = loss_fn(g).scalar();
    if (!std::isfinite(v)) throw EvaluationError("finite_diff_check: non-finite loss");
    return v;
  };

  params.zero_grad();
  {
    Graph g;
    Var loss = loss_fn(g);
    if (!std::isfinite(loss.scalar())) {
      throw EvaluationError("finite_diff_check: non-finite loss");
    }
    g.backward(loss);
  }

  FiniteDiffReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = params[k];
    const Matrix analytic = p.grad;
    double worst = 0.0;
    for (Index e = 0; e < p.value.size(); ++e) {
      double& slot = p.value.data()[e];
      const double saved = slot;
      slot = saved + h;
      const double up = evaluate();
      slot = saved - h;
      const double down = evaluate();
      slot = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.data()[e];
      const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (rel > worst) worst = rel;
      if (rel > report.max_rel_error || report.worst_entry < 0) {
        if (rel >= report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_parameter = p.name();
          report.worst_entry = e;
        }
      }
      ++report.entries_checked;
    }
    report.per_parameter.emplace_back(p.name(), worst);
  }
  return report;
}

}  // namespace seqsynth::ad
