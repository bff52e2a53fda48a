#pragma once

#include <string>

#include "hatesense/sense.hpp"
#include "hatesense/text.hpp"

namespace hatesense {

// Everything needed to run inference: model configuration, class set,
// vocabulary, and all parameter tensors. The on-disk layout is a versioned
// little-endian binary format (see README); save -> load -> save is
// byte-identical.
struct Checkpoint {
  ModelConfig config;
  ClassSet classes;
  std::vector<std::string> vocab_tokens;
  ModelParams params;

  Vocabulary vocabulary() const { return Vocabulary::from_tokens(vocab_tokens); }
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hatesense
