// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mdlm/augment.hpp"
#include "mdlm/predictor.hpp"
#include "mdlm/schedule.hpp"
#include "mdlm/vocab.hpp"

namespace mdlm {

struct TrainConfig {
  double lambda_ctc = 0.1;   // weight of the CTC term in the combined objective
  double w_slack = 0.01;     // CE down-weight at SLACK positions
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  double grad_clip = 1.0;
  int batch_size = 16;
  int epochs = 10;
  uint64_t seed = 42;
  double t_floor = 1e-3;     // t ~ U[t_floor, 1]; avoids the gamma singularity
  double ctc_infeasible_penalty = 1e3;
  int warmup_steps = 0;      // linear lr ramp over the first N steps
  int threads = 0;           // 0 = auto; results are identical for any value
};

struct LossReport {
  double ce_term = 0.0;
  double ctc_term = 0.0;
  double total = 0.0;  // ce_term + lambda_ctc * ctc_term
  long masked_position_count = 0;
  long infeasible_ctc_count = 0;
};

struct CeLossResult {
  double loss = 0.0;
  Eigen::MatrixXd dlogp;  // nonzero only at masked positions
  long masked_count = 0;
};

// gamma_t * sum_i 1[canvas_i = MASK] * ce_weight_i * (-log P(aug_target_i)).
CeLossResult ce_loss(const Eigen::MatrixXd& logp, const SlackAugmentedExample& ex,
                     const MaskedCanvas& canvas, double t, const Vocabulary& vocab,
                     const NoiseSchedule& sched = linear_schedule());

struct CombinedLossResult {
  LossReport report;
  Eigen::MatrixXd dlogp;
};

// CE on the slack-augmented target plus lambda times the CTC negative
// log-likelihood of the clean target (with its terminal EOS) over all
// response positions. Infeasible CTC instances contribute the configured
// finite penalty, no gradient, and are counted in the report.
CombinedLossResult combined_loss(const Eigen::MatrixXd& logp, const SlackAugmentedExample& ex,
                                 const MaskedCanvas& canvas, double t, const TrainConfig& cfg,
                                 const Vocabulary& vocab,
                                 const NoiseSchedule& sched = linear_schedule());

struct TrainResult {
  std::string final_checkpoint;
  std::string best_checkpoint;
  std::string metrics_csv;
  std::string digest_path;
  uint64_t stream_digest = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double best_eval_loss = 0.0;
  long skipped_examples = 0;
  int steps = 0;
};

// Full training run: shuffled mini-batches, per-example t, AdamW with global
// gradient-norm clipping, per-step CSV metrics, best-eval and final
// checkpoints, and an order-sensitive digest of the training data stream.
// Aborts with NumericError (after dumping the offending batch) on non-finite
// loss.
TrainResult train(const std::vector<CorpusRecord>& corpus, const Vocabulary& vocab,
                  const PredictorConfig& pcfg, const TrainConfig& tcfg,
                  const AugmentConfig& acfg, const std::string& out_dir);

// FNV-1a over the exact byte stream of (t, r~_0, r~_t) per batch item; two
// runs see the same data order iff the digests match.
class StreamDigest {
 public:
  void add_u64(uint64_t v);
  void add_double(double v);
  void add_ints(const std::vector<int>& v);
  uint64_t value() const { return h_; }

 private:
  uint64_t h_ = 1469598103934665603ULL;
};

}  // namespace mdlm
