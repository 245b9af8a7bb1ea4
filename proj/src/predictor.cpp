// SPDX-License-Identifier: Apache-2.0
#include "mdlm/predictor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mdlm/errors.hpp"

namespace mdlm {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInitStd = 0.02;

using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;

inline CMapMat cmat(const std::vector<double>& d, size_t off, int r, int c) {
  return CMapMat(d.data() + off, r, c);
}
inline MapMat mmat(std::vector<double>& d, size_t off, int r, int c) {
  return MapMat(d.data() + off, r, c);
}
inline CMapVec cvec(const std::vector<double>& d, size_t off, int n) {
  return CMapVec(d.data() + off, n);
}
inline MapVec mvec(std::vector<double>& d, size_t off, int n) {
  return MapVec(d.data() + off, n);
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_deriv(double x) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

// y = g .* (x - mean) * rstd + b, per row.
void layer_norm(const RowMat& x, CMapVec g, CMapVec b, RowMat& hat, Eigen::VectorXd& rstd,
                RowMat& out) {
  const int rows = static_cast<int>(x.rows());
  const int cols = static_cast<int>(x.cols());
  hat.resize(rows, cols);
  out.resize(rows, cols);
  rstd.resize(rows);
  for (int i = 0; i < rows; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().sum() / cols;
    const double r = 1.0 / std::sqrt(var + kLnEps);
    rstd(i) = r;
    hat.row(i) = (x.row(i).array() - mean) * r;
    out.row(i) = hat.row(i).array() * g.transpose().array() + b.transpose().array();
  }
}

// Accumulates dx into dx_acc and parameter grads into dg/db.
void layer_norm_backward(const RowMat& dy, const RowMat& hat, const Eigen::VectorXd& rstd,
                         CMapVec g, RowMat& dx_acc, MapVec dg, MapVec db) {
  const int rows = static_cast<int>(dy.rows());
  for (int i = 0; i < rows; ++i) {
    dg.array() += dy.row(i).transpose().array() * hat.row(i).transpose().array();
    db.array() += dy.row(i).transpose().array();
    Eigen::ArrayXd dh = dy.row(i).transpose().array() * g.array();
    const double m1 = dh.mean();
    const double m2 = (dh * hat.row(i).transpose().array()).mean();
    dx_acc.row(i).array() +=
        (rstd(i) * (dh - m1 - hat.row(i).transpose().array() * m2)).transpose();
  }
}

}  // namespace

void PredictorConfig::validate() const {
  if (embed_dim <= 0 || num_heads <= 0 || num_blocks <= 0 || mlp_hidden <= 0 ||
      max_positions <= 0) {
    throw ConfigError("predictor config: all dimensions must be positive");
  }
  if (embed_dim % num_heads != 0) {
    throw ConfigError("predictor config: embed_dim must be divisible by num_heads");
  }
  if (output_support_size < 3) {
    throw ConfigError("predictor config: output support must cover >= 1 ordinary token plus SLACK and EOS");
  }
}

ParamLayout::ParamLayout(const PredictorConfig& cfg) {
  cfg.validate();
  const size_t d = static_cast<size_t>(cfg.embed_dim);
  const size_t h = static_cast<size_t>(cfg.mlp_hidden);
  size_t off = 0;
  auto take = [&off](size_t n) {
    const size_t at = off;
    off += n;
    return at;
  };
  tok_embed = take(static_cast<size_t>(cfg.input_vocab_size()) * d);
  pos_embed = take(static_cast<size_t>(cfg.max_positions) * d);
  blocks.resize(cfg.num_blocks);
  for (auto& b : blocks) {
    b.ln1_g = take(d);
    b.ln1_b = take(d);
    b.wq = take(d * d);
    b.bq = take(d);
    b.wk = take(d * d);
    b.bk = take(d);
    b.wv = take(d * d);
    b.bv = take(d);
    b.wo = take(d * d);
    b.bo = take(d);
    b.ln2_g = take(d);
    b.ln2_b = take(d);
    b.w1 = take(d * h);
    b.b1 = take(h);
    b.w2 = take(h * d);
    b.b2 = take(d);
  }
  final_ln_g = take(d);
  final_ln_b = take(d);
  w_out = take(d * static_cast<size_t>(cfg.output_support_size));
  b_out = take(static_cast<size_t>(cfg.output_support_size));
  total = off;
}

PredictorParams PredictorParams::init(const PredictorConfig& cfg, Rng& rng) {
  const ParamLayout layout(cfg);
  PredictorParams p;
  p.config = cfg;
  p.data.assign(layout.total, 0.0);
  for (auto& v : p.data) {
    v = kInitStd * rng.normal();
  }
  const size_t d = static_cast<size_t>(cfg.embed_dim);
  for (const auto& b : layout.blocks) {
    mvec(p.data, b.ln1_g, cfg.embed_dim).setOnes();
    mvec(p.data, b.ln1_b, cfg.embed_dim).setZero();
    mvec(p.data, b.ln2_g, cfg.embed_dim).setOnes();
    mvec(p.data, b.ln2_b, cfg.embed_dim).setZero();
    mvec(p.data, b.bq, cfg.embed_dim).setZero();
    mvec(p.data, b.bk, cfg.embed_dim).setZero();
    mvec(p.data, b.bv, cfg.embed_dim).setZero();
    mvec(p.data, b.bo, cfg.embed_dim).setZero();
    mvec(p.data, b.b1, cfg.mlp_hidden).setZero();
    mvec(p.data, b.b2, cfg.embed_dim).setZero();
  }
  mvec(p.data, layout.final_ln_g, cfg.embed_dim).setOnes();
  mvec(p.data, layout.final_ln_b, cfg.embed_dim).setZero();
  mvec(p.data, layout.b_out, cfg.output_support_size).setZero();
  (void)d;
  // checkpoint precision is f32; keep fresh params at that resolution
  for (auto& v : p.data) {
    v = static_cast<double>(static_cast<float>(v));
  }
  return p;
}

namespace {

std::vector<int> concat_tokens(const PredictorConfig& cfg, std::span<const int> prompt,
                               const MaskedCanvas& canvas) {
  const int total = static_cast<int>(prompt.size() + canvas.length());
  if (total > cfg.max_positions) {
    throw ConfigError("predictor: prompt + canvas length " + std::to_string(total) +
                      " exceeds max_positions " + std::to_string(cfg.max_positions));
  }
  std::vector<int> toks;
  toks.reserve(total);
  for (int id : prompt) toks.push_back(id);
  for (int id : canvas.ids) toks.push_back(id);
  for (int id : toks) {
    if (id < 0 || id >= cfg.input_vocab_size()) {
      throw ConfigError("predictor: token id " + std::to_string(id) +
                        " outside input vocabulary");
    }
  }
  return toks;
}

}  // namespace

Eigen::MatrixXd predictor_forward(const PredictorParams& params,
                                  std::span<const int> prompt,
                                  const MaskedCanvas& canvas, ForwardCache& cache) {
  const PredictorConfig& cfg = params.config;
  const ParamLayout L(cfg);
  const int d = cfg.embed_dim;
  const int heads = cfg.num_heads;
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  cache.prompt_len = static_cast<int>(prompt.size());
  cache.tokens = concat_tokens(cfg, prompt, canvas);
  const int T = static_cast<int>(cache.tokens.size());
  const int C = static_cast<int>(canvas.length());

  const auto tokE = cmat(params.data, L.tok_embed, cfg.input_vocab_size(), d);
  const auto posE = cmat(params.data, L.pos_embed, cfg.max_positions, d);

  cache.x0.resize(T, d);
  for (int i = 0; i < T; ++i) {
    cache.x0.row(i) = tokE.row(cache.tokens[i]) + posE.row(i);
  }

  RowMat x = cache.x0;
  cache.blocks.resize(cfg.num_blocks);
  for (int b = 0; b < cfg.num_blocks; ++b) {
    const auto& pb = L.blocks[b];
    auto& cb = cache.blocks[b];

    layer_norm(x, cvec(params.data, pb.ln1_g, d), cvec(params.data, pb.ln1_b, d),
               cb.ln1_hat, cb.ln1_rstd, cb.ln1_out);

    cb.q.noalias() = cb.ln1_out * cmat(params.data, pb.wq, d, d);
    cb.q.rowwise() += cvec(params.data, pb.bq, d).transpose();
    cb.k.noalias() = cb.ln1_out * cmat(params.data, pb.wk, d, d);
    cb.k.rowwise() += cvec(params.data, pb.bk, d).transpose();
    cb.v.noalias() = cb.ln1_out * cmat(params.data, pb.wv, d, d);
    cb.v.rowwise() += cvec(params.data, pb.bv, d).transpose();

    cb.attn_p.assign(heads, RowMat());
    cb.attn_concat.resize(T, d);
    for (int h = 0; h < heads; ++h) {
      const auto qh = cb.q.middleCols(h * dh, dh);
      const auto kh = cb.k.middleCols(h * dh, dh);
      const auto vh = cb.v.middleCols(h * dh, dh);
      RowMat s = (qh * kh.transpose()) * scale;  // bidirectional: no masking
      RowMat& p = cb.attn_p[h];
      p.resize(T, T);
      for (int i = 0; i < T; ++i) {
        const double mx = s.row(i).maxCoeff();
        p.row(i) = (s.row(i).array() - mx).exp();
        p.row(i) /= p.row(i).sum();
      }
      cb.attn_concat.middleCols(h * dh, dh).noalias() = p * vh;
    }

    RowMat attn_out = cb.attn_concat * cmat(params.data, pb.wo, d, d);
    attn_out.rowwise() += cvec(params.data, pb.bo, d).transpose();
    cb.x_mid = x + attn_out;

    layer_norm(cb.x_mid, cvec(params.data, pb.ln2_g, d), cvec(params.data, pb.ln2_b, d),
               cb.ln2_hat, cb.ln2_rstd, cb.ln2_out);
    cb.h_pre.noalias() = cb.ln2_out * cmat(params.data, pb.w1, d, cfg.mlp_hidden);
    cb.h_pre.rowwise() += cvec(params.data, pb.b1, cfg.mlp_hidden).transpose();
    cb.h_act = cb.h_pre.unaryExpr([](double v) { return gelu(v); });
    RowMat mlp_out = cb.h_act * cmat(params.data, pb.w2, cfg.mlp_hidden, d);
    mlp_out.rowwise() += cvec(params.data, pb.b2, d).transpose();
    x = cb.x_mid + mlp_out;
  }

  layer_norm(x, cvec(params.data, L.final_ln_g, d), cvec(params.data, L.final_ln_b, d),
             cache.final_hat, cache.final_rstd, cache.final_out);

  // logits only for canvas rows; MASK has no output column by construction
  RowMat logits = cache.final_out.bottomRows(C) * cmat(params.data, L.w_out, d, cfg.output_support_size);
  logits.rowwise() += cvec(params.data, L.b_out, cfg.output_support_size).transpose();

  cache.logp.resize(C, cfg.output_support_size);
  cache.probs.resize(C, cfg.output_support_size);
  for (int i = 0; i < C; ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    cache.logp.row(i) = logits.row(i).array() - lse;
    cache.probs.row(i) = cache.logp.row(i).array().exp();
  }
  return cache.logp;
}

Eigen::MatrixXd predictor_forward(const PredictorParams& params,
                                  std::span<const int> prompt,
                                  const MaskedCanvas& canvas) {
  ForwardCache cache;
  return predictor_forward(params, prompt, canvas, cache);
}

void predictor_backward(const PredictorParams& params, const ForwardCache& cache,
                        const Eigen::MatrixXd& dlogp, std::vector<double>& grad) {
  const PredictorConfig& cfg = params.config;
  const ParamLayout L(cfg);
  const int d = cfg.embed_dim;
  const int heads = cfg.num_heads;
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const int T = static_cast<int>(cache.tokens.size());
  const int C = static_cast<int>(dlogp.rows());

  if (dlogp.rows() + cache.prompt_len != T || dlogp.cols() != cfg.output_support_size) {
    throw ConfigError("predictor_backward: upstream gradient shape mismatch");
  }
  grad.assign(L.total, 0.0);

  // log-softmax backward
  RowMat dlogits(C, cfg.output_support_size);
  for (int i = 0; i < C; ++i) {
    const double s = dlogp.row(i).sum();
    dlogits.row(i) = dlogp.row(i) - s * cache.probs.row(i);
  }

  mmat(grad, L.w_out, d, cfg.output_support_size).noalias() +=
      cache.final_out.bottomRows(C).transpose() * dlogits;
  mvec(grad, L.b_out, cfg.output_support_size) += dlogits.colwise().sum().transpose();

  RowMat d_final_out = RowMat::Zero(T, d);
  d_final_out.bottomRows(C).noalias() =
      dlogits * cmat(params.data, L.w_out, d, cfg.output_support_size).transpose();

  RowMat dx = RowMat::Zero(T, d);
  layer_norm_backward(d_final_out, cache.final_hat, cache.final_rstd,
                      cvec(params.data, L.final_ln_g, d), dx,
                      mvec(grad, L.final_ln_g, d), mvec(grad, L.final_ln_b, d));

  for (int b = cfg.num_blocks - 1; b >= 0; --b) {
    const auto& pb = L.blocks[b];
    const auto& cb = cache.blocks[b];

    // mlp: x_out = x_mid + gelu(ln2(x_mid) W1 + b1) W2 + b2
    RowMat dh_act = dx * cmat(params.data, pb.w2, cfg.mlp_hidden, d).transpose();
    mmat(grad, pb.w2, cfg.mlp_hidden, d).noalias() += cb.h_act.transpose() * dx;
    mvec(grad, pb.b2, d) += dx.colwise().sum().transpose();
    RowMat dh_pre =
        dh_act.binaryExpr(cb.h_pre, [](double g, double x) { return g * gelu_deriv(x); });
    mmat(grad, pb.w1, d, cfg.mlp_hidden).noalias() += cb.ln2_out.transpose() * dh_pre;
    mvec(grad, pb.b1, cfg.mlp_hidden) += dh_pre.colwise().sum().transpose();
    RowMat d_ln2_out = dh_pre * cmat(params.data, pb.w1, d, cfg.mlp_hidden).transpose();

    RowMat dx_mid = dx;  // residual branch
    layer_norm_backward(d_ln2_out, cb.ln2_hat, cb.ln2_rstd,
                        cvec(params.data, pb.ln2_g, d), dx_mid,
                        mvec(grad, pb.ln2_g, d), mvec(grad, pb.ln2_b, d));

    // attention: x_mid = x_in + (heads(ln1(x_in)) concat) Wo + bo
    RowMat d_concat = dx_mid * cmat(params.data, pb.wo, d, d).transpose();
    mmat(grad, pb.wo, d, d).noalias() += cb.attn_concat.transpose() * dx_mid;
    mvec(grad, pb.bo, d) += dx_mid.colwise().sum().transpose();

    RowMat dq = RowMat::Zero(T, d);
    RowMat dk = RowMat::Zero(T, d);
    RowMat dv = RowMat::Zero(T, d);
    for (int h = 0; h < heads; ++h) {
      const auto qh = cb.q.middleCols(h * dh, dh);
      const auto kh = cb.k.middleCols(h * dh, dh);
      const auto vh = cb.v.middleCols(h * dh, dh);
      const RowMat& p = cb.attn_p[h];
      const auto d_oh = d_concat.middleCols(h * dh, dh);

      RowMat dp = d_oh * vh.transpose();
      dv.middleCols(h * dh, dh).noalias() = p.transpose() * d_oh;

      RowMat ds(T, T);
      for (int i = 0; i < T; ++i) {
        const double dot = dp.row(i).dot(p.row(i));
        ds.row(i) = (dp.row(i).array() - dot) * p.row(i).array();
      }
      dq.middleCols(h * dh, dh).noalias() = (ds * kh) * scale;
      dk.middleCols(h * dh, dh).noalias() = (ds.transpose() * qh) * scale;
    }

    RowMat d_ln1_out = dq * cmat(params.data, pb.wq, d, d).transpose();
    d_ln1_out.noalias() += dk * cmat(params.data, pb.wk, d, d).transpose();
    d_ln1_out.noalias() += dv * cmat(params.data, pb.wv, d, d).transpose();
    mmat(grad, pb.wq, d, d).noalias() += cb.ln1_out.transpose() * dq;
    mvec(grad, pb.bq, d) += dq.colwise().sum().transpose();
    mmat(grad, pb.wk, d, d).noalias() += cb.ln1_out.transpose() * dk;
    mvec(grad, pb.bk, d) += dk.colwise().sum().transpose();
    mmat(grad, pb.wv, d, d).noalias() += cb.ln1_out.transpose() * dv;
    mvec(grad, pb.bv, d) += dv.colwise().sum().transpose();

    RowMat dx_in = dx_mid;  // residual branch
    layer_norm_backward(d_ln1_out, cb.ln1_hat, cb.ln1_rstd,
                        cvec(params.data, pb.ln1_g, d), dx_in,
                        mvec(grad, pb.ln1_g, d), mvec(grad, pb.ln1_b, d));
    dx = dx_in;
  }

  auto d_tok = mmat(grad, L.tok_embed, cfg.input_vocab_size(), d);
  auto d_pos = mmat(grad, L.pos_embed, cfg.max_positions, d);
  for (int i = 0; i < T; ++i) {
    d_tok.row(cache.tokens[i]) += dx.row(i);
    d_pos.row(i) += dx.row(i);
  }
}

std::vector<double> predictor_backward(const PredictorParams& params,
                                       std::span<const int> prompt,
                                       const MaskedCanvas& canvas,
                                       const Eigen::MatrixXd& dlogp) {
  ForwardCache cache;
  predictor_forward(params, prompt, canvas, cache);
  std::vector<double> grad;
  predictor_backward(params, cache, dlogp, grad);
  return grad;
}

}  // namespace mdlm
