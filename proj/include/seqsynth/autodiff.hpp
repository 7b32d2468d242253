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

// Minimal tape-based reverse-mode differentiation over dense matrices.
//
// A Graph records every primal operation as it is executed. Nodes are
// appended in execution order, so the tape is already a topological order and
// backward() walks it once in reverse. Trainable tensors live in a
// ParameterSet that outlives individual graphs; gradients flowing into a
// parameter leaf are accumulated into Parameter::grad.
//
// A Graph is single-threaded. Distinct graphs may run on distinct threads as
// long as they do not share a ParameterSet whose gradients are being written.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace seqsynth::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Scalar kernels

/// beta * log(1 + exp(x / beta)), overflow-safe. Throws DomainError if
/// beta <= 0.
double softplus(double x, double beta = 1.0);

/// Derivative of softplus(x, beta) with respect to x, i.e. sigmoid(x / beta).
double softplus_grad(double x, double beta = 1.0);

double sigmoid(double x);

/// Max-shifted softmax. Throws DomainError on an empty input.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits);

// ---------------------------------------------------------------------------
// Parameters

class Parameter {
 public:
  Parameter(std::string name, Matrix initial);

  const std::string& name() const { return name_; }

  Matrix value;
  Matrix grad;

 private:
  std::string name_;
};

/// Ordered, name-addressable collection of parameters with stable addresses.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  /// Adds a zero-initialized parameter. Names must be unique.
  Parameter& add(std::string name, Index rows, Index cols);

  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  double grad_norm() const;

  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter*, std::less<>> by_name_;
};

// ---------------------------------------------------------------------------
// Graph

class Graph;

/// Lightweight handle to a node of a Graph.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  /// Gradient of the last backward() pass; zero-sized if none reached it.
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Index size() const { return value().size(); }
  double scalar() const;

  int id() const { return id_; }
  Graph* graph() const { return graph_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Matrix& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  Var param(Parameter& p);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  /// Parameter gradients are accumulated, not overwritten; call
  /// ParameterSet::zero_grad() first for a fresh gradient.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Op-author interface.
  Var record(Matrix value, const char* op, std::initializer_list<Var> parents,
             BackwardFn backward);
  Var record(Matrix value, const char* op, std::span<const Var> parents,
             BackwardFn backward);
  bool needs_grad(const Var& v) const { return nodes_[v.id_].needs_grad; }
  /// Zero-initialized gradient buffer of v, allocated on first use.
  Matrix& grad_buffer(const Var& v);
  void accumulate(const Var& v, const Matrix& g);

  const Matrix& value_of(int id) const;
  const Matrix& grad_of(int id) const { return nodes_[id].grad; }
  const char* op_of(int id) const { return nodes_[id].op; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    const char* op = "";
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
    bool has_grad = false;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Shapes are checked and mismatches raise
// ContractError.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// a (n x c) plus a broadcast row vector (1 x c).
Var add_row(Var a, Var row);
/// Elementwise product with a constant matrix of the same shape.
Var mul_const(Var a, const Matrix& m);

Var matmul(Var a, Var b);
/// a * b^T.
Var matmul_nt(Var a, Var b);

Var slice_rows(Var a, Index start, Index count);
Var slice_cols(Var a, Index start, Index count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(Var a, std::span<const Index> rows);
/// Column vector of a(rows[i], cols[i]).
Var pick(Var a, std::span<const Index> rows, std::span<const Index> cols);

/// Row-wise softmax. Entries where `allowed` is false get probability 0; every
/// row must allow at least one entry.
Var softmax_rows(Var a, const Mask* allowed = nullptr);
Var log_softmax_rows(Var a);
Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5);

Var gelu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var softplus(Var a);
/// Column-wise softplus with per-column beta = clamp(exp(log_beta), lo, hi).
Var softplus_cols(Var a, Var log_beta, double beta_min = 1e-6, double beta_max = 1e6);

Var sum(Var a);
Var row_sum(Var a);
/// sum(a .* w) for a constant weight matrix w.
Var weighted_sum(Var a, const Matrix& w);

// ---------------------------------------------------------------------------
// Finite-difference verification

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  Index worst_entry = -1;
  /// Largest relative error per parameter, in ParameterSet order.
  std::vector<std::pair<std::string, double>> per_parameter;
  std::size_t entries_checked = 0;
};

/// Compares reverse-mode gradients of `loss_fn` against central differences
/// with step h, using |a - b| / max(1, |a|, |b|). `loss_fn` must be
/// deterministic; any Monte-Carlo draws it makes must come from a frozen
/// stream. Throws EvaluationError if the loss is ever non-finite.
FiniteDiffReport finite_diff_check(const std::function<Var(Graph&)>& loss_fn,
                                   ParameterSet& params, double h = 1e-5);

}  // namespace seqsynth::ad
