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
#include <random>

#include <gtest/gtest.h>

#include "seqsynth/encoder.hpp"
#include "seqsynth/errors.hpp"
#include "seqsynth/model.hpp"
#include "seqsynth/transformer.hpp"
#include "support/fixture.hpp"

namespace seqsynth {
namespace {

using ad::Matrix;

Model small_model(int d = 16, int dz = 8, int layers = 2, int heads = 4) {
  ModelConfig c;
  c.d_model = d;
  c.d_latent = dz;
  c.n_layers = layers;
  c.n_heads = heads;
  c.d_ff = 2 * d;
  Model m(c, testing::type_vocab(3));
  m.initialize(17);
  return m;
}

// Plain Eigen forward pass used as an oracle for the graph version.
Matrix ref_layer_norm(const Matrix& x, const Matrix& g, const Matrix& b) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    out.row(r) = ((x.row(r).array() - mean) / std::sqrt(var + 1e-5)).matrix().cwiseProduct(g) + b;
  }
  return out;
}

Matrix ref_linear(const Model& m, const std::string& p, const Matrix& x) {
  return (x * m.value(p + ".w")).rowwise() + m.value(p + ".b").row(0);
}

Matrix ref_gelu(const Matrix& x) {
  const double c = std::sqrt(2.0 / M_PI);
  return x.unaryExpr([c](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v))); });
}

Matrix ref_block(const Model& m, const std::string& p, const Matrix& x, int heads) {
  const Matrix h = ref_layer_norm(x, m.value(p + ".ln1.g"), m.value(p + ".ln1.b"));
  const Matrix q = ref_linear(m, p + ".q", h), k = ref_linear(m, p + ".k", h), v = ref_linear(m, p + ".v", h);
  const Eigen::Index dh = x.cols() / heads;
  Matrix attn(x.rows(), x.cols());
  for (int hd = 0; hd < heads; ++hd) {
    Matrix s = q.middleCols(hd * dh, dh) * k.middleCols(hd * dh, dh).transpose() / std::sqrt(double(dh));
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      s.row(r) = (s.row(r).array() - s.row(r).maxCoeff()).exp();
      s.row(r) /= s.row(r).sum();
    }
    attn.middleCols(hd * dh, dh) = s * v.middleCols(hd * dh, dh);
  }
  const Matrix x1 = x + ref_linear(m, p + ".o", attn);
  const Matrix f = ref_layer_norm(x1, m.value(p + ".ln2.g"), m.value(p + ".ln2.b"));
  return x1 + ref_linear(m, p + ".ff2", ref_gelu(ref_linear(m, p + ".ff1", f)));
}

TEST(TemporalEncode, ZeroTimeAlternates) {
  const std::vector<double> t{0.0};
  const Matrix e = temporal_encode(t, 8);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(e(0, i), i % 2 ? 1.0 : 0.0);
}

TEST(TemporalEncode, DistinctAndDeterministic) {
  const std::vector<double> t{1.0, 2.0};
  const Matrix a = temporal_encode(t, 16);
  EXPECT_NE(a(0, 0), a(1, 0));
  EXPECT_LT(a(0, 0), a(1, 0));
  EXPECT_TRUE((a.array() == temporal_encode(t, 16).array()).all());
  EXPECT_THROW(temporal_encode(t, 7), ConfigError);
}

TEST(Encode, BatchShapeAndZeroTail) {
  Model m = small_model();
  EventSequence s{"a", {{1, 0}, {2, 1}, {3, 2}, {4, 0}, {5, 1}}, 0};
  const std::vector<EventSequence> one{s};
  const PaddedBatch b = pad_batch(one, 9, m.vocabulary());
  const std::vector<Matrix> h = encode(m, b);
  ASSERT_EQ(h.size(), 1u);
  EXPECT_EQ(h[0].rows(), 9);
  EXPECT_EQ(h[0].cols(), 16);
  // Rows 0..4 are events and row 5 is END; everything after is padding.
  for (int r = 0; r <= 5; ++r) EXPECT_GT(h[0].row(r).norm(), 0.0) << r;
  for (int r = 6; r < 9; ++r) EXPECT_EQ(h[0].row(r).norm(), 0.0) << r;
}

TEST(Encode, PaddingContentIsIgnored) {
  Model m = small_model();
  const std::vector<EventSequence> seqs = testing::fixture(3, 5);
  std::size_t longest = 0;
  for (const auto& s : seqs) longest = std::max(longest, s.events.size());
  PaddedBatch b = pad_batch(seqs, static_cast<int>(longest) + 4, m.vocabulary());
  const std::vector<Matrix> base = encode(m, b);
  std::mt19937_64 rng(1);
  for (Eigen::Index i = 0; i < b.mask.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.mask.cols(); ++j) {
      if (b.mask(i, j)) continue;
      b.times(i, j) = std::uniform_real_distribution<double>(0, 100)(rng);
      b.types(i, j) = static_cast<int>(rng() % 4);
    }
  }
  const std::vector<Matrix> perturbed = encode(m, b);
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_TRUE((base[i].array() == perturbed[i].array()).all()) << i;
  }
}

TEST(Encode, MatchesPlainForwardOnSingleEvent) {
  Model m = small_model(16, 8, 2, 4);
  EventSequence s{"a", {{1.0, 2}}, 0};
  ad::Graph g;
  const EncoderOutput out = encode(g, m, s);

  // Rows: the event and END, which carries the same time.
  const std::vector<double> times{1.0, 1.0};
  Matrix x(2, 16);
  x.row(0) = m.value("embedding").row(2);
  x.row(1) = m.value("embedding").row(m.end_index());
  x += temporal_encode(times, 16);
  for (int l = 0; l < 2; ++l) x = ref_block(m, "enc.l" + std::to_string(l), x, 4);
  const Matrix h = ref_layer_norm(x, m.value("enc.ln_f.g"), m.value("enc.ln_f.b"));
  EXPECT_LT((out.hidden.value() - h).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((out.mu.value() - ref_linear(m, "enc.mu", h)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Encode, OnePositionAttendsOnlyToItself) {
  // A single row puts attention weight 1 on itself: the block reduces to
  // x + o(v(LN(x))) followed by the feed-forward residual.
  Model m = small_model(8, 4, 1, 2);
  Matrix x(1, 8);
  x << 0.3, -1.0, 0.2, 0.7, -0.4, 1.1, 0.0, 0.5;
  ad::Graph g;
  BlockOptions opts;
  opts.n_heads = 2;
  const Matrix got = transformer_block(g, m.params(), "enc.l0", g.constant(x), opts).value();

  const Matrix v = ref_linear(m, "enc.l0.v", ref_layer_norm(x, m.value("enc.l0.ln1.g"), m.value("enc.l0.ln1.b")));
  const Matrix x1 = x + ref_linear(m, "enc.l0.o", v);
  const Matrix f = ref_layer_norm(x1, m.value("enc.l0.ln2.g"), m.value("enc.l0.ln2.b"));
  const Matrix want = x1 + ref_linear(m, "enc.l0.ff2", ref_gelu(ref_linear(m, "enc.l0.ff1", f)));
  EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LatentParams, ZeroHiddenZeroBias) {
  Model m = small_model(16, 8);
  const auto [mu, lv] = latent_params(Matrix::Zero(3, 16), m);
  EXPECT_EQ(mu.rows(), 3);
  EXPECT_EQ(mu.cols(), 8);
  EXPECT_EQ(mu.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(lv.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LatentParams, IdenticalRowsGiveIdenticalCodes) {
  Model m = small_model(16, 8);
  Matrix h(2, 16);
  h.row(0).setLinSpaced(16, -1.0, 1.0);
  h.row(1) = h.row(0);
  const auto [mu, lv] = latent_params(h, m);
  EXPECT_TRUE((mu.row(0).array() == mu.row(1).array()).all());
  EXPECT_TRUE((lv.row(0).array() == lv.row(1).array()).all());
}

TEST(SampleZ, ZeroMultiplierReturnsMean) {
  Matrix mu(2, 3), lv(2, 3);
  mu << 1, 2, 3, -1, -2, -3;
  lv.setConstant(0.4);
  Rng rng = derive_rng(1, Stream::kLatentNoise);
  EXPECT_TRUE((sample_z(mu, lv, 0.0, rng).array() == mu.array()).all());
  EXPECT_THROW(sample_z(mu, lv, -1.0, rng), DomainError);
}

TEST(SampleZ, ReproducibleUnderSeed) {
  Matrix mu = Matrix::Zero(2, 3), lv = Matrix::Zero(2, 3);
  Rng a = derive_rng(4, Stream::kLatentNoise), b = derive_rng(4, Stream::kLatentNoise);
  EXPECT_TRUE((sample_z(mu, lv, 1.0, a).array() == sample_z(mu, lv, 1.0, b).array()).all());
}

TEST(SampleZ, MeanConvergesToMu) {
  Matrix mu(1, 3), lv(1, 3);
  mu << 0.5, -1.0, 2.0;
  lv << 0.0, std::log(4.0), std::log(0.25);
  Rng rng = derive_rng(8, Stream::kLatentNoise);
  const int n = 100000;
  Matrix acc = Matrix::Zero(1, 3);
  for (int i = 0; i < n; ++i) acc += sample_z(mu, lv, 1.0, rng);
  acc /= n;
  for (int c = 0; c < 3; ++c) {
    const double sigma = std::exp(0.5 * lv(0, c));
    EXPECT_LT(std::abs(acc(0, c) - mu(0, c)), 3.0 * sigma / std::sqrt(double(n))) << c;
  }
}

TEST(SampleZ, MultiplierScalesSpread) {
  Matrix mu = Matrix::Zero(1, 1), lv = Matrix::Zero(1, 1);
  Rng rng = derive_rng(2, Stream::kLatentNoise);
  double ss = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) ss += std::pow(sample_z(mu, lv, 4.0, rng)(0, 0), 2);
  // The multiplier scales the standard deviation.
  EXPECT_NEAR(std::sqrt(ss / n), 4.0, 0.1);
}

TEST(KL, ClosedForms) {
  const std::vector<bool> mask{true};
  EXPECT_EQ(kl_divergence(Matrix::Zero(1, 4), Matrix::Zero(1, 4), mask), 0.0);
  Matrix mu = Matrix::Zero(1, 4);
  mu(0, 2) = 1.0;
  EXPECT_DOUBLE_EQ(kl_divergence(mu, Matrix::Zero(1, 4), mask), 0.5);
}

TEST(KL, NonNegativeAndZeroOnlyAtPrior) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const std::vector<bool> mask{true, true, false};
  for (int i = 0; i < 1000; ++i) {
    Matrix mu(3, 2), lv(3, 2);
    for (Eigen::Index k = 0; k < 6; ++k) {
      mu.data()[k] = u(rng);
      lv.data()[k] = u(rng);
    }
    const double kl = kl_divergence(mu, lv, mask);
    EXPECT_GE(kl, 0.0);
    EXPECT_GT(kl, 1e-12);
  }
  // Masked rows do not count.
  Matrix mu = Matrix::Zero(3, 2), lv = Matrix::Zero(3, 2);
  mu.row(2).setConstant(5.0);
  EXPECT_LT(kl_divergence(mu, lv, mask), 1e-12);
}

TEST(KL, GraphVersionMatches) {
  Matrix mu(2, 2), lv(2, 2);
  mu << 0.1, -0.3, 0.7, 0.2;
  lv << 0.5, -0.2, 0.0, 1.0;
  ad::Graph g;
  const double v = kl_divergence(g.constant(mu), g.constant(lv)).scalar();
  EXPECT_NEAR(v, kl_divergence(mu, lv, {true, true}), 1e-14);
}

}  // namespace
}  // namespace seqsynth
