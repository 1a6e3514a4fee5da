#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "samia/corpus.hpp"
#include "samia/slots.hpp"

namespace samia {

using Ids = std::vector<int>;

/// Lowercases, splits punctuation into separate tokens, and maps digit runs
/// (and a literal "<NUM>") to the <num> token.
Tokens tokenize(std::string_view raw);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNum = 4;
  static constexpr int kSep = 5;

  Vocabulary() = default;
  /// `tokens` must start with the fixed special block.
  explicit Vocabulary(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Marker token preceding a slot's value in the agent's tag segment.
  static std::string slot_marker(std::string_view slot) { return "<" + std::string(slot) + ">"; }
  int marker_id(std::string_view slot) const;

  /// FNV-1a over the token list; checkpoints record it.
  std::uint64_t hash() const;

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

std::vector<std::string> special_tokens(const SlotSchema& schema);

/// Frequency-descending, then lexicographic. Special and slot-marker tokens
/// always occupy the lowest ids.
Vocabulary build_vocab(const std::vector<Session>& sessions, int min_freq,
                       const SlotSchema& schema = SlotSchema::coffee());

/// At most max_len ids, always EOS-terminated.
Ids encode(const Tokens& text, const Vocabulary& vocab, int max_len);

/// Stops at the first EOS; PAD and BOS are dropped.
Tokens decode(const Ids& ids, const Vocabulary& vocab);

void save_vocab(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary load_vocab(const std::filesystem::path& path);

}  // namespace samia
