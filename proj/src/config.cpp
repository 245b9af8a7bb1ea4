// SPDX-License-Identifier: Apache-2.0
#include "mdlm/config.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mdlm/errors.hpp"

namespace mdlm {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' needs an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' needs a number, got '" + v + "'");
  }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' needs an unsigned integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key '" + key + "' needs true/false, got '" + v + "'");
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(to_double(key, trim(item)));
  }
  if (out.empty()) throw ConfigError("config: key '" + key + "' needs a list");
  return out;
}

std::string resolve_path(const std::string& base_dir, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_absolute() || base_dir.empty()) return p;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text, const std::string& base_dir) {
  RunConfig cfg;

  std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters;
  auto set_str = [](std::string& dst) {
    return [&dst](const std::string&, const std::string& v) { dst = v; };
  };
  auto set_int = [](int& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = to_int(k, v); };
  };
  auto set_dbl = [](double& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = to_double(k, v); };
  };
  auto set_u64 = [](uint64_t& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = to_u64(k, v); };
  };
  auto set_bool = [](bool& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = to_bool(k, v); };
  };

  setters["vocab"] = set_str(cfg.vocab_path);
  setters["corpus"] = set_str(cfg.corpus_path);
  setters["out_dir"] = set_str(cfg.out_dir);

  setters["predictor.embed_dim"] = set_int(cfg.predictor.embed_dim);
  setters["predictor.num_heads"] = set_int(cfg.predictor.num_heads);
  setters["predictor.num_blocks"] = set_int(cfg.predictor.num_blocks);
  setters["predictor.mlp_hidden"] = set_int(cfg.predictor.mlp_hidden);
  setters["predictor.max_positions"] = set_int(cfg.predictor.max_positions);

  setters["train.lambda_ctc"] = set_dbl(cfg.train.lambda_ctc);
  setters["train.w_slack"] = set_dbl(cfg.train.w_slack);
  setters["train.learning_rate"] = set_dbl(cfg.train.learning_rate);
  setters["train.weight_decay"] = set_dbl(cfg.train.weight_decay);
  setters["train.grad_clip"] = set_dbl(cfg.train.grad_clip);
  setters["train.batch_size"] = set_int(cfg.train.batch_size);
  setters["train.epochs"] = set_int(cfg.train.epochs);
  setters["train.seed"] = set_u64(cfg.train.seed);
  setters["train.t_floor"] = set_dbl(cfg.train.t_floor);
  setters["train.ctc_infeasible_penalty"] = set_dbl(cfg.train.ctc_infeasible_penalty);
  setters["train.warmup_steps"] = set_int(cfg.train.warmup_steps);
  setters["train.threads"] = set_int(cfg.train.threads);

  setters["augment.s_max"] = set_dbl(cfg.augment.s_max);
  setters["augment.pad_convert_max"] = set_dbl(cfg.augment.pad_convert_max);
  setters["augment.batch_length"] = set_int(cfg.augment.batch_length);

  setters["decode.length"] = set_int(cfg.decode.length);
  setters["decode.steps"] = set_int(cfg.decode.steps);
  setters["decode.fix_final_eos"] = set_bool(cfg.decode.fix_final_eos);
  setters["decode.temperature"] = set_dbl(cfg.decode.temperature);
  setters["decode.merge_enabled"] = set_bool(cfg.decode.merge_enabled);
  setters["decode.merge_sequential"] = set_bool(cfg.decode.merge_sequential);
  setters["decode.seed"] = set_u64(cfg.decode.seed);

  setters["intervene.k"] = set_int(cfg.intervene.k);
  setters["intervene.times"] = [&cfg](const std::string& k, const std::string& v) {
    cfg.intervene.times = to_double_list(k, v);
  };
  setters["intervene.seed"] = set_u64(cfg.intervene.seed);

  std::stringstream ss(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError("config: unknown key '" + key + "' at line " + std::to_string(lineno));
    }
    it->second(key, value);
  }

  cfg.vocab_path = resolve_path(base_dir, cfg.vocab_path);
  cfg.corpus_path = resolve_path(base_dir, cfg.corpus_path);
  cfg.out_dir = resolve_path(base_dir, cfg.out_dir);
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("config: cannot open: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_run_config_text(buf.str(), fs::path(path).parent_path().string());
}

std::string render_run_config(const RunConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "vocab = " << cfg.vocab_path << "\n";
  os << "corpus = " << cfg.corpus_path << "\n";
  os << "out_dir = " << cfg.out_dir << "\n";
  os << "predictor.embed_dim = " << cfg.predictor.embed_dim << "\n";
  os << "predictor.num_heads = " << cfg.predictor.num_heads << "\n";
  os << "predictor.num_blocks = " << cfg.predictor.num_blocks << "\n";
  os << "predictor.mlp_hidden = " << cfg.predictor.mlp_hidden << "\n";
  os << "predictor.max_positions = " << cfg.predictor.max_positions << "\n";
  os << "train.lambda_ctc = " << cfg.train.lambda_ctc << "\n";
  os << "train.w_slack = " << cfg.train.w_slack << "\n";
  os << "train.learning_rate = " << cfg.train.learning_rate << "\n";
  os << "train.weight_decay = " << cfg.train.weight_decay << "\n";
  os << "train.grad_clip = " << cfg.train.grad_clip << "\n";
  os << "train.batch_size = " << cfg.train.batch_size << "\n";
  os << "train.epochs = " << cfg.train.epochs << "\n";
  os << "train.seed = " << cfg.train.seed << "\n";
  os << "train.t_floor = " << cfg.train.t_floor << "\n";
  os << "train.ctc_infeasible_penalty = " << cfg.train.ctc_infeasible_penalty << "\n";
  os << "train.warmup_steps = " << cfg.train.warmup_steps << "\n";
  os << "train.threads = " << cfg.train.threads << "\n";
  os << "augment.s_max = " << cfg.augment.s_max << "\n";
  os << "augment.pad_convert_max = " << cfg.augment.pad_convert_max << "\n";
  os << "augment.batch_length = " << cfg.augment.batch_length << "\n";
  os << "decode.length = " << cfg.decode.length << "\n";
  os << "decode.steps = " << cfg.decode.steps << "\n";
  os << "decode.fix_final_eos = " << (cfg.decode.fix_final_eos ? "true" : "false") << "\n";
  os << "decode.temperature = " << cfg.decode.temperature << "\n";
  os << "decode.merge_enabled = " << (cfg.decode.merge_enabled ? "true" : "false") << "\n";
  os << "decode.merge_sequential = " << (cfg.decode.merge_sequential ? "true" : "false")
     << "\n";
  os << "decode.seed = " << cfg.decode.seed << "\n";
  os << "intervene.k = " << cfg.intervene.k << "\n";
  os << "intervene.times = ";
  for (size_t i = 0; i < cfg.intervene.times.size(); ++i) {
    os << (i ? "," : "") << cfg.intervene.times[i];
  }
  os << "\n";
  os << "intervene.seed = " << cfg.intervene.seed << "\n";
  return os.str();
}

void write_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("config: cannot open for write: " + path);
  f << render_run_config(cfg);
}

}  // namespace mdlm
