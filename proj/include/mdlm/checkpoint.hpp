// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "mdlm/predictor.hpp"
#include "mdlm/vocab.hpp"

namespace mdlm {

// Checkpoint file: magic "MDLM", u32 version, vocabulary block, config block,
// then the parameter vector in ParamLayout order as little-endian f32.
// Parameters are persisted at single precision; in-memory doubles are rounded
// on save, so anything loaded (or freshly initialized) round-trips bit-exactly.
struct Checkpoint {
  PredictorParams params;
  Vocabulary vocab;
};

void save_checkpoint(const PredictorParams& params, const Vocabulary& vocab,
                     const std::string& path);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace mdlm
