// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "mdlm/augment.hpp"
#include "mdlm/decoder.hpp"
#include "mdlm/intervene.hpp"
#include "mdlm/objective.hpp"
#include "mdlm/predictor.hpp"

namespace mdlm {

// Flat "key = value" run configuration; '#' starts a comment. Unknown keys
// are rejected and relative paths resolve against the config file directory.
struct RunConfig {
  std::string vocab_path;
  std::string corpus_path;
  std::string out_dir;
  PredictorConfig predictor;
  TrainConfig train;
  AugmentConfig augment;
  DecodeConfig decode;
  InterventionConfig intervene;
};

RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text, const std::string& base_dir);

std::string render_run_config(const RunConfig& cfg);
void write_run_config(const RunConfig& cfg, const std::string& path);

}  // namespace mdlm
