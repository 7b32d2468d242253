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

#include <gtest/gtest.h>

#include "seqsynth/errors.hpp"
#include "seqsynth/training.hpp"
#include "support/fixture.hpp"

namespace seqsynth {
namespace {

using ad::Matrix;

Model small_model(std::uint64_t seed = 5) {
  ModelConfig c;
  c.d_model = 16;
  c.d_latent = 4;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 32;
  Model m(c, testing::type_vocab(3));
  m.initialize(seed);
  return m;
}

TEST(Losses, TimeMse) {
  Matrix t(2, 1), p(2, 1);
  t << 2.0, 3.0;
  p << 1.0, 3.0;
  ad::Graph g;
  EXPECT_DOUBLE_EQ(time_mse(t, g.constant(p), {true, true}).scalar(), 0.5);
  EXPECT_DOUBLE_EQ(time_mse(t, g.constant(p), {false, true}).scalar(), 0.0);
  EXPECT_THROW(time_mse(t, g.constant(p), {false, false}), UndefinedLossError);
}

TEST(Losses, TypeCrossEntropyUniform) {
  ad::Graph g;
  const std::vector<ad::Index> types{0, 2, 3};
  const double ce = type_ce(types, g.constant(Matrix::Zero(3, 4)), {true, true, true}).scalar();
  EXPECT_NEAR(ce, std::log(4.0), 1e-15);
}

TEST(Losses, LengthLoss) {
  ad::Graph g;
  Matrix sure = Matrix::Zero(2, 4);
  sure.col(3).setConstant(50.0);
  EXPECT_LT(length_loss(g.constant(sure), 3, {true, true}).scalar(), 1e-20);
  EXPECT_NEAR(length_loss(g.constant(Matrix::Zero(2, 4)), 3, {true, true}).scalar(), std::log(4.0),
              1e-15);
  EXPECT_THROW(length_loss(g.constant(sure), 3, {true, false}), ContractError);
}

class TotalLoss : public ::testing::Test {
 protected:
  std::vector<EventSequence> batch_ = testing::fixture(4, 61);
  Model model_ = small_model();
};

TEST_F(TotalLoss, TermsSumToTotal) {
  TrainConfig cfg;
  cfg.kl_weight = 0.3;
  cfg.time_weight = 2.0;
  ad::Graph g;
  const LossResult r = total_loss(g, model_, batch_, cfg, 17, {});
  const LossBreakdown& t = r.terms;
  EXPECT_NEAR(t.total, t.hawkes + t.kl + t.time + t.type + t.length, 1e-12 * std::abs(t.total));
  EXPECT_EQ(r.n_events, [&] {
    std::size_t n = 0;
    for (const auto& s : batch_) n += s.events.size();
    return n;
  }());
}

TEST_F(TotalLoss, WeightsScaleTheirTermOnly) {
  TrainConfig a, b;
  b.kl_weight = 2.0;
  b.type_weight = 0.0;
  ad::Graph g1, g2;
  const LossBreakdown x = total_loss(g1, model_, batch_, a, 3, {}).terms;
  const LossBreakdown y = total_loss(g2, model_, batch_, b, 3, {}).terms;
  EXPECT_DOUBLE_EQ(y.hawkes, x.hawkes);
  EXPECT_NEAR(y.kl, 2.0 * x.kl, 1e-12);
  EXPECT_EQ(y.type, 0.0);
  EXPECT_DOUBLE_EQ(y.time, x.time);
}

TEST_F(TotalLoss, SameSeedSameGradients) {
  TrainConfig cfg;
  auto grads = [&](std::uint64_t seed) {
    model_.params().zero_grad();
    ad::Graph g;
    LossResult r = total_loss(g, model_, batch_, cfg, seed, {});
    g.backward(r.total);
    std::vector<Matrix> gs;
    for (std::size_t i = 0; i < model_.params().size(); ++i) gs.push_back(model_.params()[i].grad);
    return std::pair{r.terms.total, gs};
  };
  const auto a = grads(8), b = grads(8), c = grads(9);
  EXPECT_EQ(a.first, b.first);
  EXPECT_NE(a.first, c.first);
  for (std::size_t i = 0; i < a.second.size(); ++i) {
    EXPECT_TRUE((a.second[i].array() == b.second[i].array()).all());
  }
}

TEST_F(TotalLoss, NonFiniteParameterAborts) {
  model_.params().at("head.time.b").value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  ad::Graph g;
  try {
    total_loss(g, model_, batch_, TrainConfig{}, 1, {});
    FAIL() << "expected TrainingAbortError";
  } catch (const TrainingAbortError& e) {
    EXPECT_NE(std::string(e.what()).find("time"), std::string::npos) << e.what();
  }
}

TEST(Optimizer, ClipScalesOnly) {
  ad::ParameterSet ps;
  ps.add("a", 1, 2).grad << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(ps.at("a").grad(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(ps.at("a").grad(0, 1), 0.8, 1e-15);
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 10.0), 1.0);
  EXPECT_NEAR(ps.at("a").grad(0, 1), 0.8, 1e-15);
}

TEST(Optimizer, AdamFirstStepIsSignedLr) {
  ad::ParameterSet ps;
  ad::Parameter& p = ps.add("p", 1, 3);
  p.value << 1.0, 1.0, 1.0;
  p.grad << 0.5, -2.0, 1e-3;
  Adam adam(ps, 0.1);
  adam.step(ps);
  EXPECT_NEAR(p.value(0, 0), 0.9, 1e-7);
  EXPECT_NEAR(p.value(0, 1), 1.1, 1e-7);
  EXPECT_NEAR(p.value(0, 2), 0.9, 1e-5);
  EXPECT_EQ(adam.steps(), 1);
}

TEST(Config, ValidationAndJsonRoundTrip) {
  TrainConfig c;
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.lr = 1e-3;
  c.val_fraction = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.val_fraction = 0.2;
  c.kl_weight = 0.05;
  c.seed = 123456789012345ULL;
  const TrainConfig back = train_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

class Fit : public ::testing::Test {
 protected:
  static TrainConfig config(int epochs) {
    TrainConfig c;
    c.epochs = epochs;
    c.lr = 3e-3;
    c.batch_size = 8;
    c.n_mc = 5;
    c.eval_n_mc = 20;
    c.seed = 4;
    return c;
  }
  std::vector<EventSequence> data_ = testing::fixture(40, 71);
};

TEST_F(Fit, CurveAndDeterminism) {
  const std::span<const EventSequence> train(data_.data(), 32), val(data_.data() + 32, 8);
  Model a = small_model(), b = small_model();
  int calls = 0;
  const FitResult ra = fit(a, train, val, config(3), [&](int, const LossBreakdown&) { ++calls; });
  const FitResult rb = fit(b, train, val, config(3));
  EXPECT_EQ(calls, 3);
  ASSERT_EQ(ra.curve.size(), 3u * 8u);
  for (std::size_t i = 0; i < ra.curve.size(); ++i) {
    EXPECT_EQ(ra.curve[i].epoch, static_cast<int>(i / 8) + 1);
    EXPECT_EQ(ra.curve[i].value, rb.curve[i].value);
  }
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    EXPECT_TRUE((a.params()[i].value.array() == b.params()[i].value.array()).all());
  }
}

TEST_F(Fit, ValidationImprovesAndBestIsRestored) {
  const std::span<const EventSequence> train(data_.data(), 32), val(data_.data() + 32, 8);
  Model m = small_model();
  const FitResult r = fit(m, train, val, config(50));
  EXPECT_LT(r.best_val_loss, r.initial_val_loss);
  EXPECT_GT(r.best_epoch, 0);

  // Re-scoring the restored parameters reproduces the recorded best.
  double best_seen = std::numeric_limits<double>::infinity();
  for (const auto& p : r.curve) {
    if (p.term == "val_total") best_seen = std::min(best_seen, p.value);
  }
  EXPECT_EQ(best_seen, r.best_val_loss);
  TrainConfig c = config(0);
  const FitResult again = fit(m, train, val, c);
  EXPECT_EQ(again.initial_val_loss, r.best_val_loss);
}

TEST_F(Fit, EmptyTrainingSetRejected) {
  Model m = small_model();
  EXPECT_THROW(fit(m, {}, {}, TrainConfig{}), ContractError);
}

}  // namespace
}  // namespace seqsynth
