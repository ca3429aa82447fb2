// Binary checkpoint files: a free-form JSON metadata blob plus an ordered map
// of named parameter tensors, with a version header and whole-file checksum.
// Payloads are little-endian IEEE floats at the build's `real` width; the
// reader accepts either width and converts.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "scenediff/tensor.hpp"

namespace scenediff {

struct Checkpoint {
  std::string meta_json;  // model config, normalization stats, config hash
  std::vector<std::pair<std::string, Tensor>> params;

  const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// The checksum stored in the file's trailer; serves as the checkpoint's
// identity hash in rollout files.
uint64_t checkpoint_file_hash(const std::string& path);

}  // namespace scenediff
