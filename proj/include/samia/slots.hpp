#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace samia {

using Tokens = std::vector<std::string>;

/// Filled slots: slot name -> value as a space-joined token string. Absent means vacant.
using SlotState = std::map<std::string, std::string>;

inline constexpr std::string_view kNumToken = "<num>";

enum class SlotKind { Lexicon, Address };

struct SlotDef {
  std::string name;
  SlotKind kind = SlotKind::Lexicon;
  /// Lexicon slots: surface forms (possibly multi-word). Address slots: the
  /// street/building keywords that, following a <num> token, mark an address.
  std::vector<std::string> values;
};

struct SlotSchema {
  std::vector<SlotDef> slots;

  /// taste / size / temperature / address, the coffee-ordering default.
  static SlotSchema coffee();

  /// Throws std::invalid_argument on duplicate names, empty lexicons, or a
  /// surface form shared between slots.
  void validate() const;

  const SlotDef* find(std::string_view name) const;
  std::vector<std::string> names() const;
};

/// Longest-match lexicon scan plus the address pattern. Later matches of the
/// same slot overwrite earlier ones.
SlotState extract_slots(const Tokens& text, const SlotSchema& schema);

/// Slots present in `found` but vacant in `tags`.
std::vector<std::string> new_slots(const SlotState& found, const SlotState& tags);

/// I(A, O | tags): 1 iff the agent/user pair fills at least one vacant slot.
int indicator(const Tokens& agent, const Tokens& user, const SlotState& tags,
              const SlotSchema& schema);

/// Union of keys; on conflict the value from `newer` wins.
SlotState merge(SlotState tags, const SlotState& newer);

/// Key-set inclusion.
bool is_subset(const SlotState& a, const SlotState& b);

bool is_complete(const SlotState& tags, const SlotSchema& schema);

std::string join_tokens(const Tokens& tokens);
Tokens split_tokens(std::string_view text);

}  // namespace samia
