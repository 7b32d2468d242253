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

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "seqsynth/autodiff.hpp"
#include "seqsynth/errors.hpp"
#include "seqsynth/rng.hpp"

namespace seqsynth::ad {
namespace {

TEST(Softplus, ClosedForms) {
  EXPECT_NEAR(softplus(0.0, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(softplus(0.0, 2.0), 2.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(softplus(100.0, 1.0), 100.0, 1e-12);
  EXPECT_THROW(softplus(1.0, 0.0), DomainError);
}

TEST(Softplus, StrictlyPositive) {
  for (double x : {-700.0, -50.0, -1.0, 0.0, 3.0, 800.0}) {
    EXPECT_GT(softplus(x), 0.0) << x;
  }
}

TEST(Softmax, UniformSaturationAndShift) {
  const Eigen::VectorXd u = softmax(Eigen::VectorXd::Zero(3));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(u(i), 1.0 / 3.0, 1e-15);

  Eigen::VectorXd v(2);
  v << 7.0, 107.0;
  const Eigen::VectorXd s = softmax(v);
  EXPECT_LT(s(0), 1e-40);
  EXPECT_NEAR(s(1), 1.0, 1e-15);

  Eigen::VectorXd w(4);
  w << 0.3, -1.2, 2.5, 0.0;
  const Eigen::VectorXd a = softmax(w);
  const Eigen::VectorXd b = softmax((w.array() + 5.0).matrix());
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(a(i), b(i), 1e-15);
}

TEST(Backward, SoftplusSlopeAtZero) {
  Parameter x("x", Matrix::Zero(1, 1));
  Graph g;
  Var y = sum(softplus(g.param(x)));
  x.grad.setZero();
  g.backward(y);
  EXPECT_DOUBLE_EQ(x.grad(0, 0), 0.5);
}

TEST(Backward, SumOfSoftmaxHasZeroGradient) {
  Matrix v(1, 4);
  v << 0.5, -1.0, 2.0, 0.1;
  Parameter p("v", v);
  p.grad.setZero();
  Graph g;
  g.backward(sum(softmax_rows(g.param(p))));
  EXPECT_LT(p.grad.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Backward, NonScalarLossIsContractError) {
  Parameter p("p", Matrix::Ones(2, 2));
  Graph g;
  EXPECT_THROW(g.backward(g.param(p)), ContractError);
}

TEST(Backward, NonFiniteLossNamesTheNode) {
  Parameter p("p", Matrix::Constant(1, 1, -1.0));
  Graph g;
  try {
    g.backward(sum(log(g.param(p))));
    FAIL() << "expected PoisonedGradientError";
  } catch (const PoisonedGradientError& e) {
    EXPECT_NE(std::string(e.what()).find("log"), std::string::npos) << e.what();
  }
}

TEST(Backward, DeterministicBitIdentical) {
  Rng rng = derive_rng(3, Stream::kInit);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix a(3, 4), b(4, 2);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  for (Index i = 0; i < b.size(); ++i) b.data()[i] = n(rng);
  auto run = [&] {
    Parameter pa("a", a), pb("b", b);
    pa.grad.setZero();
    pb.grad.setZero();
    Graph g;
    g.backward(sum(gelu(matmul(g.param(pa), g.param(pb)))));
    return std::pair{pa.grad, pb.grad};
  };
  const auto r1 = run();
  const auto r2 = run();
  EXPECT_TRUE((r1.first.array() == r2.first.array()).all());
  EXPECT_TRUE((r1.second.array() == r2.second.array()).all());
}

TEST(FiniteDiff, SquareIsExact) {
  ParameterSet ps;
  ps.add("x", 1, 1).value(0, 0) = 3.0;
  const auto rep = finite_diff_check([&](Graph& g) { return sum(square(g.param(ps.at("x")))); }, ps, 1e-5);
  EXPECT_LT(rep.max_rel_error, 1e-9);
  ps.zero_grad();
  Graph g;
  g.backward(sum(square(g.param(ps.at("x")))));
  EXPECT_DOUBLE_EQ(ps.at("x").grad(0, 0), 6.0);
}

TEST(FiniteDiff, FrozenNoiseRepeatsExactly) {
  ParameterSet ps;
  ps.add("x", 2, 3).value.setConstant(0.4);
  auto fn = [&](Graph& g) {
    Rng rng = derive_rng(9, Stream::kMonteCarlo);
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix noise(2, 3);
    for (Index i = 0; i < noise.size(); ++i) noise.data()[i] = n(rng);
    return sum(mul(tanh(g.param(ps.at("x"))), g.constant(noise)));
  };
  Graph g1, g2;
  EXPECT_EQ(fn(g1).scalar(), fn(g2).scalar());
  EXPECT_LT(finite_diff_check(fn, ps).max_rel_error, 1e-8);
}

// Every primitive against central differences on random inputs.

class PrimitiveGradient : public ::testing::Test {
 protected:
  Matrix random(Index r, Index c, double lo = -3.0, double hi = 3.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng_);
    return m;
  }

  // Reduces an op's output to a scalar through fixed random weights so every
  // output entry contributes.
  void check(const std::function<Var(Graph&, std::vector<Var>&)>& op,
             std::vector<Matrix> inputs, double tol = 1e-6) {
    ParameterSet ps;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      ps.add("in" + std::to_string(i), inputs[i].rows(), inputs[i].cols()).value = inputs[i];
    }
    Matrix w;
    auto fn = [&](Graph& g) {
      std::vector<Var> vars;
      for (std::size_t i = 0; i < ps.size(); ++i) vars.push_back(g.param(ps[i]));
      Var out = op(g, vars);
      if (w.size() == 0) w = random(out.rows(), out.cols(), 0.5, 1.5);
      return weighted_sum(out, w);
    };
    const FiniteDiffReport rep = finite_diff_check(fn, ps, 1e-5);
    EXPECT_LT(rep.max_rel_error, tol) << rep.worst_parameter << "[" << rep.worst_entry << "]";
  }

  Rng rng_ = derive_rng(2024, Stream::kInit);
};

TEST_F(PrimitiveGradient, Elementwise) {
  check([](Graph&, auto& v) { return add(v[0], v[1]); }, {random(3, 2), random(3, 2)});
  check([](Graph&, auto& v) { return sub(v[0], v[1]); }, {random(3, 2), random(3, 2)});
  check([](Graph&, auto& v) { return mul(v[0], v[1]); }, {random(3, 2), random(3, 2)});
  check([](Graph&, auto& v) { return scale(v[0], -1.7); }, {random(2, 2)});
  check([](Graph&, auto& v) { return add_scalar(v[0], 0.3); }, {random(2, 2)});
  check([](Graph&, auto& v) { return add_row(v[0], v[1]); }, {random(4, 3), random(1, 3)});
  check([&](Graph&, auto& v) { return mul_const(v[0], Matrix::Constant(2, 3, 0.7)); }, {random(2, 3)});
  check([](Graph&, auto& v) { return gelu(v[0]); }, {random(3, 3)});
  check([](Graph&, auto& v) { return tanh(v[0]); }, {random(3, 3)});
  check([](Graph&, auto& v) { return sigmoid(v[0]); }, {random(3, 3)});
  check([](Graph&, auto& v) { return exp(v[0]); }, {random(3, 3)});
  check([](Graph&, auto& v) { return log(v[0]); }, {random(3, 3, 0.5, 3.0)});
  check([](Graph&, auto& v) { return square(v[0]); }, {random(3, 3)});
  check([](Graph&, auto& v) { return softplus(v[0]); }, {random(3, 3)});
}

TEST_F(PrimitiveGradient, Linear) {
  check([](Graph&, auto& v) { return matmul(v[0], v[1]); }, {random(3, 4), random(4, 2)});
  check([](Graph&, auto& v) { return matmul_nt(v[0], v[1]); }, {random(3, 4), random(5, 4)});
  check([](Graph&, auto& v) { return slice_rows(v[0], 1, 2); }, {random(4, 3)});
  check([](Graph&, auto& v) { return slice_cols(v[0], 1, 2); }, {random(3, 4)});
  check([](Graph&, auto& v) { return concat_rows(std::span<const Var>(v)); }, {random(2, 3), random(1, 3)});
  check([](Graph&, auto& v) { return concat_cols(std::span<const Var>(v)); }, {random(2, 3), random(2, 1)});
  const std::vector<Index> rows{2, 0, 2, 1};
  check([&](Graph&, auto& v) { return gather_rows(v[0], rows); }, {random(3, 2)});
  const std::vector<Index> pr{0, 1, 1}, pc{2, 0, 2};
  check([&](Graph&, auto& v) { return pick(v[0], pr, pc); }, {random(2, 3)});
  check([](Graph&, auto& v) { return sum(v[0]); }, {random(3, 3)});
  check([](Graph&, auto& v) { return row_sum(v[0]); }, {random(3, 4)});
}

TEST_F(PrimitiveGradient, Normalizers) {
  check([](Graph&, auto& v) { return softmax_rows(v[0]); }, {random(3, 4)});
  Mask m(3, 4);
  m << true, false, true, true, true, true, false, false, true, true, true, true;
  check([&](Graph&, auto& v) { return softmax_rows(v[0], &m); }, {random(3, 4)});
  check([](Graph&, auto& v) { return log_softmax_rows(v[0]); }, {random(3, 4)});
  check([](Graph&, auto& v) { return layer_norm_rows(v[0], v[1], v[2]); },
        {random(3, 5), random(1, 5), random(1, 5)});
  check([](Graph&, auto& v) { return softplus_cols(v[0], v[1]); }, {random(4, 3), random(1, 3, -1.0, 1.0)});
}

TEST(Softmax, NonFiniteRowBecomesNaN) {
  Matrix x(2, 3);
  x << 0.0, std::numeric_limits<double>::quiet_NaN(), 1.0, 0.0, 1.0, 2.0;
  Graph g;
  const Matrix p = softmax_rows(g.constant(x)).value();
  EXPECT_TRUE(p.row(0).array().isNaN().all());
  EXPECT_NEAR(p.row(1).sum(), 1.0, 1e-15);
  Mask none = Mask::Constant(2, 3, false);
  EXPECT_THROW(softmax_rows(g.constant(x), &none), ContractError);
}

TEST(SoftplusCols, ColumnBetaMatchesScalarKernel) {
  Matrix x(2, 2), lb(1, 2);
  x << 0.0, 1.0, -2.0, 3.0;
  lb << 0.0, std::log(2.0);
  Graph g;
  const Matrix out = softplus_cols(g.constant(x), g.constant(lb)).value();
  EXPECT_NEAR(out(0, 0), softplus(0.0, 1.0), 1e-15);
  EXPECT_NEAR(out(0, 1), softplus(1.0, 2.0), 1e-14);
  EXPECT_NEAR(out(1, 1), softplus(3.0, 2.0), 1e-14);
}

TEST(Graph, ConstantsTakeNoGradient) {
  Graph g;
  Var c = g.constant(Matrix::Ones(2, 2));
  EXPECT_FALSE(g.needs_grad(c));
}

}  // namespace
}  // namespace seqsynth::ad
