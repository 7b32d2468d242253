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

// Pre-LN transformer blocks shared by the encoder and the decoder.
//
//   x1 = x + Attn(LN1(x))
//   x2 = x1 + W2 gelu(W1 LN2(x1) + b1) + b2
//
// Parameters of block "<prefix>" are <prefix>.ln1.g/b, .q.w/b, .k.w/b, .v.w/b,
// .o.w/b, .ln2.g/b, .ff1.w/b and .ff2.w/b.

#pragma once

#include <string>
#include <vector>

#include "seqsynth/autodiff.hpp"
#include "seqsynth/rng.hpp"

namespace seqsynth {

void add_block_params(ad::ParameterSet& params, const std::string& prefix, int d, int d_ff);

// Dropout is applied to both residual branches when `dropout_rng` is set.
struct BlockOptions {
  int n_heads = 1;
  bool causal = false;
  double dropout = 0.0;
  Rng* dropout_rng = nullptr;
};

ad::Var transformer_block(ad::Graph& g, ad::ParameterSet& params, const std::string& prefix,
                          ad::Var x, const BlockOptions& options);

// Affine map x W + b with parameters <prefix>.w and <prefix>.b.
ad::Var linear(ad::Graph& g, ad::ParameterSet& params, const std::string& prefix, ad::Var x);

ad::Var layer_norm(ad::Graph& g, ad::ParameterSet& params, const std::string& prefix, ad::Var x);

// Plain-Eigen kernels mirroring the graph ops, for inference outside a graph.
namespace infer {

ad::Matrix layer_norm(const ad::Matrix& x, const ad::Matrix& gain, const ad::Matrix& bias,
                      double eps = 1e-5);
ad::Matrix gelu(const ad::Matrix& x);
ad::Matrix linear(const ad::ParameterSet& params, const std::string& prefix, const ad::Matrix& x);

// Causal block evaluated one position at a time with cached keys/values.
class CachedBlock {
 public:
  CachedBlock(const ad::ParameterSet& params, std::string prefix, int n_heads);

  // Consumes the next position (1 x d) and returns its output row.
  ad::Matrix step(const ad::Matrix& x);
  void reset();

 private:
  const ad::ParameterSet& params_;
  std::string prefix_;
  int n_heads_;
  ad::Matrix keys_;
  ad::Matrix values_;
};

}  // namespace infer

}  // namespace seqsynth
