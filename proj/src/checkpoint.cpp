// SPDX-License-Identifier: Apache-2.0
#include "mdlm/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "mdlm/errors.hpp"

namespace mdlm {

namespace {

constexpr char kMagic[4] = {'M', 'D', 'L', 'M'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& f, uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& f, uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& f) {
  uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!f) throw CheckpointError(CheckpointFault::truncated, "checkpoint: truncated file");
  return v;
}
uint64_t read_u64(std::istream& f) {
  uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!f) throw CheckpointError(CheckpointFault::truncated, "checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const PredictorParams& params, const Vocabulary& vocab,
                     const std::string& path) {
  const ParamLayout layout(params.config);
  if (params.data.size() != layout.total) {
    throw CheckpointError(CheckpointFault::shape_mismatch,
                          "checkpoint: parameter vector does not match config layout");
  }
  if (params.config.output_support_size != vocab.support_size()) {
    throw CheckpointError(CheckpointFault::shape_mismatch,
                          "checkpoint: config support does not match vocabulary");
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open for write: " + path);

  f.write(kMagic, 4);
  write_u32(f, kVersion);
  write_u32(f, static_cast<uint32_t>(vocab.size()));
  for (int i = 0; i < vocab.size(); ++i) {
    const std::string& tok = vocab.token(i);
    write_u32(f, static_cast<uint32_t>(tok.size()));
    f.write(tok.data(), static_cast<std::streamsize>(tok.size()));
  }
  write_u32(f, static_cast<uint32_t>(vocab.base_size()));

  const auto& c = params.config;
  for (int v : {c.embed_dim, c.num_heads, c.num_blocks, c.mlp_hidden, c.max_positions,
                c.output_support_size}) {
    write_u32(f, static_cast<uint32_t>(v));
  }

  write_u64(f, static_cast<uint64_t>(params.data.size()));
  std::vector<float> buf(params.data.size());
  for (size_t i = 0; i < params.data.size(); ++i) {
    buf[i] = static_cast<float>(params.data[i]);
  }
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!f) throw IoError("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open: " + path);

  char magic[4] = {0};
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError(CheckpointFault::magic_mismatch,
                          "checkpoint: bad magic bytes in " + path);
  }
  const uint32_t version = read_u32(f);
  if (version != kVersion) {
    throw CheckpointError(CheckpointFault::version_mismatch,
                          "checkpoint: unsupported version " + std::to_string(version));
  }

  const uint32_t n_tokens = read_u32(f);
  if (n_tokens < 4 || n_tokens > 1u << 20) {
    throw CheckpointError(CheckpointFault::shape_mismatch,
                          "checkpoint: implausible token count");
  }
  std::vector<std::string> tokens(n_tokens);
  for (auto& tok : tokens) {
    const uint32_t len = read_u32(f);
    if (len > 64) {
      throw CheckpointError(CheckpointFault::shape_mismatch,
                            "checkpoint: implausible token length");
    }
    tok.resize(len);
    f.read(tok.data(), len);
    if (!f) throw CheckpointError(CheckpointFault::truncated, "checkpoint: truncated file");
  }
  const uint32_t base = read_u32(f);
  if (base + 3 != n_tokens) {
    throw CheckpointError(CheckpointFault::shape_mismatch,
                          "checkpoint: vocabulary base size inconsistent");
  }

  Checkpoint ckpt;
  ckpt.vocab =
      Vocabulary::from_tokens(std::vector<std::string>(tokens.begin(), tokens.begin() + base));

  auto& c = ckpt.params.config;
  c.embed_dim = static_cast<int>(read_u32(f));
  c.num_heads = static_cast<int>(read_u32(f));
  c.num_blocks = static_cast<int>(read_u32(f));
  c.mlp_hidden = static_cast<int>(read_u32(f));
  c.max_positions = static_cast<int>(read_u32(f));
  c.output_support_size = static_cast<int>(read_u32(f));
  if (c.output_support_size != ckpt.vocab.support_size()) {
    throw CheckpointError(CheckpointFault::shape_mismatch,
                          "checkpoint: config support does not match vocabulary");
  }
  ParamLayout layout(c);  // validates the config

  const uint64_t count = read_u64(f);
  if (count != layout.total) {
    throw CheckpointError(CheckpointFault::shape_mismatch,
                          "checkpoint: parameter count " + std::to_string(count) +
                              " does not match layout " + std::to_string(layout.total));
  }
  std::vector<float> buf(count);
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(count * sizeof(float)));
  if (!f) throw CheckpointError(CheckpointFault::truncated, "checkpoint: truncated file");

  ckpt.params.data.resize(count);
  for (size_t i = 0; i < count; ++i) {
    ckpt.params.data[i] = static_cast<double>(buf[i]);
  }
  return ckpt;
}

}  // namespace mdlm
