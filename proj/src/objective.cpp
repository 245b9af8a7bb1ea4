// SPDX-License-Identifier: Apache-2.0
#include "mdlm/objective.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "mdlm/checkpoint.hpp"
#include "mdlm/ctc.hpp"
#include "mdlm/errors.hpp"

namespace mdlm {

namespace fs = std::filesystem;

void StreamDigest::add_u64(uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h_ ^= (v >> (8 * i)) & 0xFF;
    h_ *= 1099511628211ULL;
  }
}

void StreamDigest::add_double(double v) {
  uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof(bits));
  add_u64(bits);
}

void StreamDigest::add_ints(const std::vector<int>& v) {
  for (int x : v) add_u64(static_cast<uint64_t>(static_cast<uint32_t>(x)));
}

CeLossResult ce_loss(const Eigen::MatrixXd& logp, const SlackAugmentedExample& ex,
                     const MaskedCanvas& canvas, double t, const Vocabulary& vocab,
                     const NoiseSchedule& sched) {
  const size_t L = ex.aug_target.size();
  if (canvas.length() != L || static_cast<size_t>(logp.rows()) != L) {
    throw std::invalid_argument("ce_loss: canvas/log-prob shape does not match example");
  }
  CeLossResult res;
  res.dlogp = Eigen::MatrixXd::Zero(logp.rows(), logp.cols());
  const double g = sched.gamma(t);
  for (size_t i = 0; i < L; ++i) {
    if (!canvas.is_masked(i)) continue;
    ++res.masked_count;
    const int col = vocab.support_of_id(ex.aug_target[i]);
    const double w = ex.ce_weight[i];
    res.loss -= g * w * logp(static_cast<Eigen::Index>(i), col);
    res.dlogp(static_cast<Eigen::Index>(i), col) -= g * w;
  }
  return res;
}

CombinedLossResult combined_loss(const Eigen::MatrixXd& logp, const SlackAugmentedExample& ex,
                                 const MaskedCanvas& canvas, double t, const TrainConfig& cfg,
                                 const Vocabulary& vocab, const NoiseSchedule& sched) {
  CombinedLossResult out;
  CeLossResult ce = ce_loss(logp, ex, canvas, t, vocab, sched);
  out.report.ce_term = ce.loss;
  out.report.masked_position_count = ce.masked_count;
  out.dlogp = std::move(ce.dlogp);

  // CTC target: the clean response plus its supervised terminal EOS, so runs
  // of padding EOS collapse onto the same end marker the CE term teaches.
  std::vector<int> target;
  target.reserve(ex.clean_target.length() + 1);
  for (int id : ex.clean_target.ids) {
    target.push_back(vocab.support_of_id(id));
  }
  target.push_back(vocab.support_of_id(vocab.eos_id()));
  const int blank = vocab.support_of_id(vocab.slack_id());

  const auto ll = ctc::log_likelihood(logp, target, blank);
  if (!ll.feasible()) {
    out.report.ctc_term = cfg.ctc_infeasible_penalty;
    out.report.infeasible_ctc_count = 1;
  } else {
    out.report.ctc_term = -ll.log_likelihood;
    if (cfg.lambda_ctc != 0.0) {
      out.dlogp += cfg.lambda_ctc * ctc::grad(logp, target, blank);
    }
  }
  out.report.total = out.report.ce_term + cfg.lambda_ctc * out.report.ctc_term;
  return out;
}

namespace {

struct AdamState {
  std::vector<double> m, v;
  int step = 0;
};

void adamw_update(PredictorParams& params, const std::vector<double>& grad, AdamState& st,
                  const TrainConfig& cfg) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++st.step;
  double lr = cfg.learning_rate;
  if (cfg.warmup_steps > 0 && st.step <= cfg.warmup_steps) {
    lr *= static_cast<double>(st.step) / cfg.warmup_steps;
  }
  const double c1 = 1.0 - std::pow(b1, st.step);
  const double c2 = 1.0 - std::pow(b2, st.step);
  for (size_t i = 0; i < params.data.size(); ++i) {
    st.m[i] = b1 * st.m[i] + (1.0 - b1) * grad[i];
    st.v[i] = b2 * st.v[i] + (1.0 - b2) * grad[i] * grad[i];
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    params.data[i] -=
        lr * (mhat / (std::sqrt(vhat) + eps) + cfg.weight_decay * params.data[i]);
  }
}

struct ItemResult {
  LossReport report;
  std::vector<double> grad;
};

// One (loss, grad) per batch item, computed by a small worker pool. The
// reduction over items happens in index order so results do not depend on the
// thread count.
void compute_items(const PredictorParams& params, const std::vector<BatchItem>& items,
                   const TrainConfig& cfg, const Vocabulary& vocab,
                   std::vector<ItemResult>& results) {
  results.resize(items.size());
  int n_threads = cfg.threads > 0 ? cfg.threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::clamp(n_threads, 1, static_cast<int>(items.size()));

  auto worker = [&](size_t begin, size_t end) {
    ForwardCache cache;
    for (size_t i = begin; i < end; ++i) {
      const auto& item = items[i];
      const Eigen::MatrixXd logp =
          predictor_forward(params, item.example.prompt.ids, item.canvas, cache);
      auto cl = combined_loss(logp, item.example, item.canvas, item.t, cfg, vocab);
      results[i].report = cl.report;
      predictor_backward(params, cache, cl.dlogp, results[i].grad);
    }
  };

  if (n_threads == 1) {
    worker(0, items.size());
    return;
  }
  std::vector<std::thread> pool;
  const size_t chunk = (items.size() + n_threads - 1) / n_threads;
  for (int w = 0; w < n_threads; ++w) {
    const size_t begin = w * chunk;
    const size_t end = std::min(items.size(), begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(worker, begin, end);
  }
  for (auto& th : pool) th.join();
}

double evaluate(const PredictorParams& params, const std::vector<CorpusRecord>& records,
                const TrainConfig& tcfg, const AugmentConfig& acfg, const Vocabulary& vocab) {
  // fixed derived seed: eval draws never touch the training data stream
  Rng rng(tcfg.seed ^ 0xE7A1BEEFULL);
  std::vector<double> ts(records.size());
  for (auto& t : ts) t = tcfg.t_floor + (1.0 - tcfg.t_floor) * rng.unit();
  auto items = prepare_batch(records, ts, acfg, vocab, tcfg.w_slack, rng);
  double total = 0.0;
  ForwardCache cache;
  for (const auto& item : items) {
    const Eigen::MatrixXd logp =
        predictor_forward(params, item.example.prompt.ids, item.canvas, cache);
    total += combined_loss(logp, item.example, item.canvas, item.t, tcfg, vocab).report.total;
  }
  return total / static_cast<double>(items.size());
}

void dump_diverged_batch(const std::string& path, int step,
                         const std::vector<BatchItem>& items,
                         const std::vector<ItemResult>& results) {
  std::ofstream f(path);
  f << "{\n  \"step\": " << step << ",\n  \"items\": [\n";
  for (size_t i = 0; i < items.size(); ++i) {
    f << "    {\"t\": " << items[i].t << ", \"total\": " << results[i].report.total
      << ", \"prompt\": [";
    for (size_t k = 0; k < items[i].example.prompt.ids.size(); ++k) {
      f << (k ? "," : "") << items[i].example.prompt.ids[k];
    }
    f << "], \"aug_target\": [";
    for (size_t k = 0; k < items[i].example.aug_target.size(); ++k) {
      f << (k ? "," : "") << items[i].example.aug_target[k];
    }
    f << "], \"canvas\": [";
    for (size_t k = 0; k < items[i].canvas.ids.size(); ++k) {
      f << (k ? "," : "") << items[i].canvas.ids[k];
    }
    f << "]}" << (i + 1 < items.size() ? "," : "") << "\n";
  }
  f << "  ]\n}\n";
}

}  // namespace

TrainResult train(const std::vector<CorpusRecord>& corpus, const Vocabulary& vocab,
                  const PredictorConfig& pcfg, const TrainConfig& tcfg,
                  const AugmentConfig& acfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  TrainResult result;

  std::vector<CorpusRecord> usable;
  for (const auto& rec : corpus) {
    const bool ok = fits_batch(rec.second, acfg) &&
                    static_cast<int>(rec.first.length()) + acfg.batch_length <=
                        pcfg.max_positions;
    if (ok) {
      usable.push_back(rec);
    } else {
      ++result.skipped_examples;
    }
  }
  if (result.skipped_examples > 0) {
    std::cerr << "train: skipped " << result.skipped_examples
              << " examples that do not fit batch_length/max_positions\n";
  }
  if (usable.empty()) {
    throw ConfigError("train: no usable examples in corpus");
  }

  // Held-out split for best-checkpoint selection; tiny corpora (overfit runs)
  // evaluate on the training set itself.
  std::vector<CorpusRecord> train_set, eval_set;
  if (usable.size() > 32) {
    const size_t n_eval = std::min<size_t>(64, usable.size() / 10);
    train_set.assign(usable.begin(), usable.end() - n_eval);
    eval_set.assign(usable.end() - n_eval, usable.end());
  } else {
    train_set = usable;
    eval_set = usable;
  }

  Rng init_rng(tcfg.seed);
  PredictorParams params = PredictorParams::init(pcfg, init_rng);
  AdamState adam;
  adam.m.assign(params.data.size(), 0.0);
  adam.v.assign(params.data.size(), 0.0);

  Rng data_rng(tcfg.seed ^ 0xD474A575ULL);
  StreamDigest digest;

  const int steps_per_epoch =
      static_cast<int>((train_set.size() + tcfg.batch_size - 1) / tcfg.batch_size);
  const int total_steps = steps_per_epoch * tcfg.epochs;
  const int eval_interval = std::max(1, total_steps / 10);

  const std::string csv_path = out_dir + "/metrics.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("train: cannot open metrics csv: " + csv_path);
  csv << "step,t,ce,ctc,total,infeasible_count,grad_norm\n";
  csv.precision(17);

  const std::string best_path = out_dir + "/best.ckpt";
  const std::string final_path = out_dir + "/final.ckpt";
  double best_eval = std::numeric_limits<double>::infinity();
  bool best_saved = false;

  std::vector<size_t> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<ItemResult> results;
  std::vector<double> grad(params.data.size());
  int step = 0;

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    shuffle(order, data_rng);
    for (size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      const size_t end = std::min(order.size(), start + tcfg.batch_size);
      std::vector<CorpusRecord> records;
      records.reserve(end - start);
      for (size_t i = start; i < end; ++i) records.push_back(train_set[order[i]]);

      std::vector<double> ts(records.size());
      for (auto& t : ts) t = tcfg.t_floor + (1.0 - tcfg.t_floor) * data_rng.unit();
      auto items = prepare_batch(records, ts, acfg, vocab, tcfg.w_slack, data_rng);

      digest.add_u64(static_cast<uint64_t>(step));
      for (const auto& item : items) {
        digest.add_double(item.t);
        digest.add_ints(item.example.aug_target);
        digest.add_ints(item.canvas.ids);
      }

      compute_items(params, items, tcfg, vocab, results);

      const double inv_b = 1.0 / static_cast<double>(items.size());
      std::fill(grad.begin(), grad.end(), 0.0);
      LossReport report;
      double t_mean = 0.0;
      for (size_t i = 0; i < items.size(); ++i) {  // fixed-order reduction
        const auto& r = results[i];
        for (size_t k = 0; k < grad.size(); ++k) grad[k] += r.grad[k];
        report.ce_term += r.report.ce_term;
        report.ctc_term += r.report.ctc_term;
        report.masked_position_count += r.report.masked_position_count;
        report.infeasible_ctc_count += r.report.infeasible_ctc_count;
        t_mean += items[i].t;
      }
      for (auto& g : grad) g *= inv_b;
      report.ce_term *= inv_b;
      report.ctc_term *= inv_b;
      report.total = report.ce_term + tcfg.lambda_ctc * report.ctc_term;
      t_mean *= inv_b;

      if (!std::isfinite(report.total)) {
        const std::string dump = out_dir + "/diverged_batch.json";
        dump_diverged_batch(dump, step, items, results);
        throw NumericError("train: non-finite loss at step " + std::to_string(step) +
                           "; offending batch dumped to " + dump);
      }

      double grad_norm = 0.0;
      for (double g : grad) grad_norm += g * g;
      grad_norm = std::sqrt(grad_norm);
      if (tcfg.grad_clip > 0.0 && grad_norm > tcfg.grad_clip) {
        const double s = tcfg.grad_clip / grad_norm;
        for (auto& g : grad) g *= s;
      }

      adamw_update(params, grad, adam, tcfg);
      ++step;

      csv << step << ',' << t_mean << ',' << report.ce_term << ',' << report.ctc_term << ','
          << report.total << ',' << report.infeasible_ctc_count << ',' << grad_norm << "\n";

      if (step == 1) result.initial_loss = report.total;
      result.final_loss = report.total;

      if (step % eval_interval == 0 || step == total_steps) {
        const double ev = evaluate(params, eval_set, tcfg, acfg, vocab);
        if (ev < best_eval) {
          best_eval = ev;
          save_checkpoint(params, vocab, best_path);
          best_saved = true;
        }
      }
    }
  }

  save_checkpoint(params, vocab, final_path);
  if (!best_saved) {
    save_checkpoint(params, vocab, best_path);
    best_eval = evaluate(params, eval_set, tcfg, acfg, vocab);
  }

  const std::string digest_path = out_dir + "/stream_digest.txt";
  {
    std::ofstream df(digest_path);
    df << std::hex << digest.value() << "\n";
  }

  result.final_checkpoint = final_path;
  result.best_checkpoint = best_path;
  result.metrics_csv = csv_path;
  result.digest_path = digest_path;
  result.stream_digest = digest.value();
  result.best_eval_loss = best_eval;
  result.steps = step;
  return result;
}

}  // namespace mdlm
