// SPDX-License-Identifier: Apache-2.0
//
// mdlm — train, run and probe a small masked diffusion language model with
// slack-token (CTC) alignment relaxation.
//
// Subcommands: vocab-build, make-suite, train, generate, intervene, eval,
// bench, diagnose. Exit codes: 2 configuration, 3 I/O, 4 numeric failure.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mdlm/augment.hpp"
#include "mdlm/checkpoint.hpp"
#include "mdlm/config.hpp"
#include "mdlm/ctc.hpp"
#include "mdlm/decoder.hpp"
#include "mdlm/errors.hpp"
#include "mdlm/intervene.hpp"
#include "mdlm/objective.hpp"
#include "mdlm/tasks.hpp"
#include "mdlm/vocab.hpp"

namespace fs = std::filesystem;
using namespace mdlm;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(std::stoi(item));
  }
  if (out.empty()) throw ConfigError("empty integer list");
  return out;
}

struct NamedModel {
  std::string name;
  Checkpoint ckpt;
};

std::vector<NamedModel> load_models(const std::vector<std::string>& specs) {
  std::vector<NamedModel> models;
  for (const auto& spec : specs) {
    const size_t eq = spec.find('=');
    NamedModel m;
    if (eq == std::string::npos) {
      m.name = fs::path(spec).stem().string();
      m.ckpt = load_checkpoint(spec);
    } else {
      m.name = spec.substr(0, eq);
      m.ckpt = load_checkpoint(spec.substr(eq + 1));
    }
    models.push_back(std::move(m));
  }
  return models;
}

int cmd_vocab_build(const std::string& corpus_path, const std::string& out_path) {
  const auto records = load_corpus_text(corpus_path);
  std::string text;
  for (const auto& [p, r] : records) {
    text += p;
    text += r;
  }
  const Vocabulary vocab = Vocabulary::from_corpus_text(text);
  vocab.save(out_path);
  std::cerr << "vocab-build: " << vocab.base_size() << " ordinary tokens + 3 specials -> "
            << out_path << "\n";
  return 0;
}

int cmd_make_suite(const std::string& task, int n, uint64_t seed, const std::string& out) {
  const auto suite = generate_suite(task, n, seed);
  std::ofstream f(out);
  if (!f) throw IoError("cannot open for write: " + out);
  for (const auto& ex : suite) {
    f << ex.prompt << '\t' << ex.reference << "\n";
  }
  std::cerr << "make-suite: " << suite.size() << " " << task << " examples -> " << out
            << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, double lambda_override, bool has_lambda,
              uint64_t seed_override, bool has_seed, const std::string& out_override) {
  RunConfig cfg = parse_run_config(config_path);
  if (has_lambda) cfg.train.lambda_ctc = lambda_override;
  if (has_seed) cfg.train.seed = seed_override;
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (cfg.out_dir.empty()) throw ConfigError("train: out_dir not set");
  if (cfg.corpus_path.empty()) throw ConfigError("train: corpus not set");

  Vocabulary vocab;
  if (!cfg.vocab_path.empty()) {
    vocab = Vocabulary::load(cfg.vocab_path);
  } else {
    const std::string text = read_file(cfg.corpus_path);
    vocab = Vocabulary::from_corpus_text(text);
  }
  cfg.predictor.output_support_size = vocab.support_size();

  fs::create_directories(cfg.out_dir);
  write_run_config(cfg, cfg.out_dir + "/config_resolved.cfg");

  const auto records = tokenize_corpus(load_corpus_text(cfg.corpus_path), vocab);
  const TrainResult res =
      train(records, vocab, cfg.predictor, cfg.train, cfg.augment, cfg.out_dir);
  std::cerr << "train: " << res.steps << " steps, final loss " << res.final_loss
            << ", best eval " << res.best_eval_loss << "\n";
  std::cerr << "train: final checkpoint " << res.final_checkpoint << "\n";
  std::cerr << "train: stream digest " << std::hex << res.stream_digest << std::dec << "\n";
  return 0;
}

int cmd_generate(const std::string& ckpt_path, const std::string& prompt,
                 const DecodeConfig& dcfg, const std::string& trace_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const auto res = decode(ckpt.params, ckpt.vocab, ckpt.vocab.encode(prompt), dcfg);
  std::cout << res.text << "\n";
  if (!trace_path.empty()) {
    write_trace_jsonl(res.trace, trace_path);
    std::cerr << trace_path << "\n";
  }
  return 0;
}

int cmd_intervene(const std::vector<std::string>& model_specs, const std::string& task,
                  int n, const std::string& k_list, uint64_t seed, const DecodeConfig& dcfg,
                  const std::string& out) {
  const auto models = load_models(model_specs);
  std::vector<NamedCheckpoint> named;
  for (const auto& m : models) named.push_back({m.name, &m.ckpt, dcfg});
  InterventionConfig icfg;
  icfg.seed = seed;
  const auto sweep = robustness_sweep(named, task, n, parse_int_list(k_list), icfg, seed);
  write_sweep_csv(sweep, out);
  for (const auto& [name, r] : sweep.r_by_model) {
    std::cerr << "intervene: " << name << " r = " << r << "\n";
  }
  std::cerr << "intervene: wrote " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& task, int n, uint64_t seed,
             const DecodeConfig& dcfg, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const auto suite = generate_suite(task, n, seed);
  std::ofstream f(out);
  if (!f) throw IoError("cannot open for write: " + out);
  f << "task,index,exact,similarity\n";
  f.precision(10);
  double exact_sum = 0.0, sim_sum = 0.0;
  for (size_t i = 0; i < suite.size(); ++i) {
    const auto res = decode(ckpt.params, ckpt.vocab, ckpt.vocab.encode(suite[i].prompt), dcfg);
    const double ex = exact_match(res.text, suite[i].reference);
    const double sim = edit_similarity(res.text, suite[i].reference);
    exact_sum += ex;
    sim_sum += sim;
    f << task << ',' << i << ',' << ex << ',' << sim << "\n";
  }
  std::cout << "task=" << task << " n=" << n << " exact=" << exact_sum / n
            << " similarity=" << sim_sum / n << "\n";
  return 0;
}

int cmd_bench(const std::string& ckpt_path, const std::string& lengths_list, int warmup,
              int runs, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);  // load excluded from timing
  std::ofstream f(out);
  if (!f) throw IoError("cannot open for write: " + out);
  f << "length,steps,merge_enabled,runs,mean_seconds,tokens_per_second\n";
  f.precision(10);

  for (int L : parse_int_list(lengths_list)) {
    double tps[2] = {0.0, 0.0};
    for (int merge = 1; merge >= 0; --merge) {
      DecodeConfig dcfg;
      dcfg.length = L;
      dcfg.steps = L / 2;
      dcfg.merge_enabled = merge == 1;
      for (int w = 0; w < warmup; ++w) {
        decode(ckpt.params, ckpt.vocab, CleanSequence{}, dcfg);
      }
      double total_s = 0.0;
      for (int r = 0; r < runs; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        decode(ckpt.params, ckpt.vocab, CleanSequence{}, dcfg);
        total_s += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
      const double mean_s = total_s / runs;
      const double tokens_per_s = static_cast<double>(L) / mean_s;
      tps[merge] = tokens_per_s;
      f << L << ',' << dcfg.steps << ',' << (merge ? "true" : "false") << ',' << runs << ','
        << mean_s << ',' << tokens_per_s << "\n";
    }
    std::cout << "L=" << L << " merge_on=" << tps[1] << " tok/s, merge_off=" << tps[0]
              << " tok/s, rel_diff=" << std::abs(tps[1] - tps[0]) / tps[0] << "\n";
  }
  std::cerr << "bench: wrote " << out << "\n";
  return 0;
}

int cmd_diagnose(const std::vector<std::string>& model_specs, int n, uint64_t seed,
                 const DecodeConfig& dcfg, const std::string& out) {
  const auto models = load_models(model_specs);
  const auto suite = generate_suite("digits", n, seed);
  std::ofstream f(out);
  if (!f) throw IoError("cannot open for write: " + out);
  f << "model,group,n,exact_rate,drop_rate\n";
  f.precision(10);

  for (const auto& m : models) {
    int n_rep = 0, n_norep = 0;
    int exact_rep = 0, exact_norep = 0;
    int drop_rep = 0, drop_norep = 0;
    for (const auto& ex : suite) {
      const auto res = decode(m.ckpt.params, m.ckpt.vocab,
                              m.ckpt.vocab.encode(ex.prompt), dcfg);
      if (has_adjacent_repeat(ex.reference)) {
        ++n_rep;
        exact_rep += res.text == ex.reference ? 1 : 0;
        drop_rep += is_repeat_drop(res.text, ex.reference) ? 1 : 0;
      } else {
        ++n_norep;
        exact_norep += res.text == ex.reference ? 1 : 0;
        drop_norep += is_single_char_drop(res.text, ex.reference) ? 1 : 0;
      }
    }
    f << m.name << ",repeat," << n_rep << ',' << static_cast<double>(exact_rep) / n_rep
      << ',' << static_cast<double>(drop_rep) / n_rep << "\n";
    f << m.name << ",no_repeat," << n_norep << ','
      << static_cast<double>(exact_norep) / n_norep << ','
      << static_cast<double>(drop_norep) / n_norep << "\n";
    std::cout << "model=" << m.name << " repeat_drop_rate="
              << static_cast<double>(drop_rep) / n_rep
              << " norepeat_drop_rate=" << static_cast<double>(drop_norep) / n_norep << "\n";
  }
  std::cerr << "diagnose: wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"masked diffusion LM with slack-token alignment relaxation"};
  app.require_subcommand(1);

  // vocab-build
  auto* vb = app.add_subcommand("vocab-build", "build a character vocabulary from a corpus");
  std::string vb_corpus, vb_out;
  vb->add_option("--corpus", vb_corpus)->required();
  vb->add_option("--out", vb_out)->required();

  // make-suite
  auto* ms = app.add_subcommand("make-suite", "write a synthetic task corpus (prompt TAB response)");
  std::string ms_task = "copy", ms_out;
  int ms_n = 1000;
  uint64_t ms_seed = 1;
  ms->add_option("--task", ms_task);
  ms->add_option("--n", ms_n);
  ms->add_option("--seed", ms_seed);
  ms->add_option("--out", ms_out)->required();

  // train
  auto* tr = app.add_subcommand("train", "train from a run config");
  std::string tr_config, tr_out;
  double tr_lambda = 0.0;
  uint64_t tr_seed = 0;
  tr->add_option("--config", tr_config)->required();
  auto* tr_lambda_opt = tr->add_option("--lambda", tr_lambda, "override train.lambda_ctc");
  auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "override train.seed");
  tr->add_option("--out-dir", tr_out, "override out_dir");

  // shared decode options
  const auto add_decode_options = [](CLI::App* cmd, DecodeConfig& dcfg) {
    cmd->add_option("--length", dcfg.length);
    cmd->add_option("--steps", dcfg.steps);
    cmd->add_option("--temperature", dcfg.temperature);
    cmd->add_option("--decode-seed", dcfg.seed);
    cmd->add_flag("--no-merge", [&dcfg](int64_t) { dcfg.merge_enabled = false; },
                  "disable the duplicate-merge step");
    cmd->add_flag("--sequential-merge", [&dcfg](int64_t) { dcfg.merge_sequential = true; },
                  "use the pairwise in-place merge variant");
    cmd->add_flag("--no-fix-final-eos", [&dcfg](int64_t) { dcfg.fix_final_eos = false; });
  };

  // generate
  auto* ge = app.add_subcommand("generate", "decode a prompt and print the text");
  std::string ge_ckpt, ge_prompt, ge_trace;
  DecodeConfig ge_dcfg;
  ge->add_option("--checkpoint", ge_ckpt)->required();
  ge->add_option("--prompt", ge_prompt)->required();
  ge->add_option("--trace", ge_trace, "write the decode trace as JSON lines");
  add_decode_options(ge, ge_dcfg);

  // intervene
  auto* iv = app.add_subcommand("intervene", "robustness sweep over shift boundaries K");
  std::vector<std::string> iv_models;
  std::string iv_task = "copy", iv_k = "0,2,4,8,16", iv_out;
  int iv_n = 50;
  uint64_t iv_seed = 0;
  DecodeConfig iv_dcfg;
  iv->add_option("--checkpoint", iv_models, "name=path (repeatable)")->required();
  iv->add_option("--task", iv_task);
  iv->add_option("--n", iv_n);
  iv->add_option("--k", iv_k, "comma-separated K values");
  iv->add_option("--seed", iv_seed);
  iv->add_option("--out", iv_out)->required();
  add_decode_options(iv, iv_dcfg);

  // eval
  auto* ev = app.add_subcommand("eval", "score a checkpoint on a task suite");
  std::string ev_ckpt, ev_task = "copy", ev_out;
  int ev_n = 100;
  uint64_t ev_seed = 0;
  DecodeConfig ev_dcfg;
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--task", ev_task);
  ev->add_option("--n", ev_n);
  ev->add_option("--seed", ev_seed);
  ev->add_option("--out", ev_out)->required();
  add_decode_options(ev, ev_dcfg);

  // bench
  auto* be = app.add_subcommand("bench", "merge on/off throughput (6 warm-ups, 30 timed runs)");
  std::string be_ckpt, be_lengths = "64,128,256", be_out;
  int be_warmup = 6, be_runs = 30;
  be->add_option("--checkpoint", be_ckpt)->required();
  be->add_option("--lengths", be_lengths);
  be->add_option("--warmup", be_warmup);
  be->add_option("--runs", be_runs);
  be->add_option("--out", be_out)->required();

  // diagnose
  auto* di = app.add_subcommand("diagnose", "repeated-digit drop diagnostic");
  std::vector<std::string> di_models;
  int di_n = 200;
  uint64_t di_seed = 0;
  std::string di_out;
  DecodeConfig di_dcfg;
  di->add_option("--checkpoint", di_models, "name=path (repeatable)")->required();
  di->add_option("--n", di_n);
  di->add_option("--seed", di_seed);
  di->add_option("--out", di_out)->required();
  add_decode_options(di, di_dcfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (vb->parsed()) return cmd_vocab_build(vb_corpus, vb_out);
    if (ms->parsed()) return cmd_make_suite(ms_task, ms_n, ms_seed, ms_out);
    if (tr->parsed()) {
      return cmd_train(tr_config, tr_lambda, tr_lambda_opt->count() > 0, tr_seed,
                       tr_seed_opt->count() > 0, tr_out);
    }
    if (ge->parsed()) return cmd_generate(ge_ckpt, ge_prompt, ge_dcfg, ge_trace);
    if (iv->parsed()) return cmd_intervene(iv_models, iv_task, iv_n, iv_k, iv_seed, iv_dcfg, iv_out);
    if (ev->parsed()) return cmd_eval(ev_ckpt, ev_task, ev_n, ev_seed, ev_dcfg, ev_out);
    if (be->parsed()) return cmd_bench(be_ckpt, be_lengths, be_warmup, be_runs, be_out);
    if (di->parsed()) return cmd_diagnose(di_models, di_n, di_seed, di_dcfg, di_out);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "i/o failure: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
