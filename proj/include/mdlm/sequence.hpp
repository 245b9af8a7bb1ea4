// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mdlm {

// Token sequence containing no MASK and no SLACK ids (x_0 / r_0).
struct CleanSequence {
  std::vector<int> ids;

  size_t length() const { return ids.size(); }
  bool operator==(const CleanSequence&) const = default;
};

// Fixed-length sequence over V u {MASK, SLACK, EOS} with per-position commit
// status. Length never changes after construction; committed[i] implies
// ids[i] != mask_id.
struct MaskedCanvas {
  std::vector<int> ids;
  std::vector<uint8_t> committed;
  int mask;  // the MASK id this canvas was built against

  static MaskedCanvas all_masked(size_t length, int mask_id) {
    MaskedCanvas c;
    c.ids.assign(length, mask_id);
    c.committed.assign(length, 0);
    c.mask = mask_id;
    return c;
  }

  // Commit status derived from content: every non-MASK position is committed.
  static MaskedCanvas from_ids(std::vector<int> ids, int mask_id) {
    MaskedCanvas c;
    c.committed.resize(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
      c.committed[i] = ids[i] != mask_id ? 1 : 0;
    }
    c.ids = std::move(ids);
    c.mask = mask_id;
    return c;
  }

  size_t length() const { return ids.size(); }
  bool is_masked(size_t i) const { return ids[i] == mask; }
  bool is_committed(size_t i) const { return committed[i] != 0; }

  size_t masked_count() const {
    size_t n = 0;
    for (int id : ids) {
      if (id == mask) ++n;
    }
    return n;
  }

  size_t committed_count() const {
    size_t n = 0;
    for (uint8_t c : committed) {
      n += c;
    }
    return n;
  }
};

}  // namespace mdlm
