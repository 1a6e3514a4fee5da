#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "samia/seq2seq.hpp"

namespace samia {

struct Checkpoint {
  std::string role;  // "user", "slnt", "slt", "samia", ...
  std::uint64_t vocab_hash = 0;
  Seq2SeqParams params;
};

/// Little-endian container; see docs/formats.md.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws when the file is missing, malformed, or (if given) was trained
/// against a different vocabulary.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_vocab_hash = std::nullopt);

}  // namespace samia
