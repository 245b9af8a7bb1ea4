// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "mdlm/rng.hpp"
#include "mdlm/sequence.hpp"

namespace mdlm {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Shape of the mask predictor: token embedding + learned absolute positional
// embedding, pre-norm encoder blocks with fully bidirectional self-attention
// and a GELU feed-forward, final layer norm, untied output projection onto
// the output support (ordinary tokens + SLACK + EOS; MASK has no logit).
struct PredictorConfig {
  int embed_dim = 128;
  int num_heads = 4;
  int num_blocks = 4;
  int mlp_hidden = 512;
  int max_positions = 256;
  int output_support_size = 0;

  // MASK is embeddable on the input side only.
  int input_vocab_size() const { return output_support_size + 1; }
  int head_dim() const { return embed_dim / num_heads; }
  void validate() const;

  bool operator==(const PredictorConfig&) const = default;
};

// Offsets of every named parameter segment inside the flat vector; this is
// also the checkpoint serialization order.
struct ParamLayout {
  struct Block {
    size_t ln1_g, ln1_b;
    size_t wq, bq, wk, bk, wv, bv, wo, bo;
    size_t ln2_g, ln2_b;
    size_t w1, b1, w2, b2;
  };

  size_t tok_embed = 0;  // input_vocab_size x embed_dim
  size_t pos_embed = 0;  // max_positions x embed_dim
  std::vector<Block> blocks;
  size_t final_ln_g = 0, final_ln_b = 0;
  size_t w_out = 0, b_out = 0;  // embed_dim x support, support
  size_t total = 0;

  explicit ParamLayout(const PredictorConfig& cfg);
};

struct PredictorParams {
  PredictorConfig config;
  std::vector<double> data;

  // Gaussian init (std 0.02 for projections/embeddings, layer norms at 1/0),
  // quantized to f32 so a fresh model round-trips checkpoints bit-exactly.
  static PredictorParams init(const PredictorConfig& cfg, Rng& rng);
};

// Activations recorded by the forward pass for reuse in backward.
struct ForwardCache {
  int prompt_len = 0;
  std::vector<int> tokens;  // prompt ++ canvas ids

  struct BlockCache {
    RowMat ln1_hat, ln1_out;
    Eigen::VectorXd ln1_rstd;
    RowMat q, k, v;
    std::vector<RowMat> attn_p;  // per-head row-softmax, T x T
    RowMat attn_concat;
    RowMat x_mid;
    RowMat ln2_hat, ln2_out;
    Eigen::VectorXd ln2_rstd;
    RowMat h_pre, h_act;
  };

  RowMat x0;
  std::vector<BlockCache> blocks;
  RowMat final_hat, final_out;
  Eigen::VectorXd final_rstd;
  RowMat logp;   // canvas rows x support
  RowMat probs;  // exp(logp)
};

// Per-position log-probabilities over the output support for the canvas
// positions only. Attention sees the whole prompt+canvas concatenation with
// no causal mask. Each row exponentiates to a simplex point.
Eigen::MatrixXd predictor_forward(const PredictorParams& params,
                                  std::span<const int> prompt,
                                  const MaskedCanvas& canvas);

Eigen::MatrixXd predictor_forward(const PredictorParams& params,
                                  std::span<const int> prompt,
                                  const MaskedCanvas& canvas, ForwardCache& cache);

// Reverse-mode gradient of sum(dlogp * logp) over every parameter, returned
// in ParamLayout order.
std::vector<double> predictor_backward(const PredictorParams& params,
                                       std::span<const int> prompt,
                                       const MaskedCanvas& canvas,
                                       const Eigen::MatrixXd& dlogp);

void predictor_backward(const PredictorParams& params, const ForwardCache& cache,
                        const Eigen::MatrixXd& dlogp, std::vector<double>& grad);

}  // namespace mdlm
