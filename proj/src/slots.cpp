#include "samia/slots.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace samia {

SlotSchema SlotSchema::coffee() {
  SlotSchema s;
  s.slots = {
      {"taste", SlotKind::Lexicon,
       {"latte", "cappuccino", "americano", "mocha", "caramel macchiato"}},
      {"size", SlotKind::Lexicon, {"tall", "medium", "grande", "venti"}},
      {"temperature", SlotKind::Lexicon, {"hot", "cold"}},
      {"address", SlotKind::Address, {"building", "road", "street", "tower", "park", "avenue"}},
  };
  return s;
}

void SlotSchema::validate() const {
  std::set<std::string> names;
  std::map<std::string, std::string> owner;
  for (const auto& slot : slots) {
    if (slot.name.empty()) throw std::invalid_argument("schema: empty slot name");
    if (!names.insert(slot.name).second)
      throw std::invalid_argument("schema: duplicate slot '" + slot.name + "'");
    if (slot.values.empty())
      throw std::invalid_argument("schema: empty lexicon for slot '" + slot.name + "'");
    for (const auto& v : slot.values) {
      if (split_tokens(v).empty())
        throw std::invalid_argument("schema: blank surface form in slot '" + slot.name + "'");
      auto [it, inserted] = owner.emplace(v, slot.name);
      if (!inserted && it->second != slot.name)
        throw std::invalid_argument("schema: surface form '" + v + "' shared by slots '" +
                                    it->second + "' and '" + slot.name + "'");
    }
  }
}

const SlotDef* SlotSchema::find(std::string_view name) const {
  for (const auto& s : slots)
    if (s.name == name) return &s;
  return nullptr;
}

std::vector<std::string> SlotSchema::names() const {
  std::vector<std::string> out;
  out.reserve(slots.size());
  for (const auto& s : slots) out.push_back(s.name);
  return out;
}

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

Tokens split_tokens(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

namespace {

bool is_terminator(const std::string& t) { return t == "." || t == "?" || t == "!"; }

struct LexEntry {
  Tokens words;
  std::string slot;
  std::string value;
};

std::vector<LexEntry> lexicon_entries(const SlotSchema& schema) {
  std::vector<LexEntry> entries;
  for (const auto& slot : schema.slots) {
    if (slot.kind != SlotKind::Lexicon) continue;
    for (const auto& v : slot.values) entries.push_back({split_tokens(v), slot.name, v});
  }
  // longest first so multi-word values win
  std::stable_sort(entries.begin(), entries.end(), [](const LexEntry& a, const LexEntry& b) {
    return a.words.size() > b.words.size();
  });
  return entries;
}

}  // namespace

SlotState extract_slots(const Tokens& text, const SlotSchema& schema) {
  SlotState found;
  const auto entries = lexicon_entries(schema);

  std::size_t i = 0;
  while (i < text.size()) {
    const LexEntry* hit = nullptr;
    for (const auto& e : entries) {
      if (i + e.words.size() > text.size()) continue;
      if (std::equal(e.words.begin(), e.words.end(), text.begin() + static_cast<long>(i))) {
        hit = &e;
        break;
      }
    }
    if (hit) {
      found[hit->slot] = hit->value;
      i += hit->words.size();
    } else {
      ++i;
    }
  }

  for (const auto& slot : schema.slots) {
    if (slot.kind != SlotKind::Address) continue;
    // <num> followed (within the same sentence) by a street/building keyword
    for (std::size_t n = 0; n < text.size(); ++n) {
      if (text[n] != kNumToken) continue;
      std::optional<std::size_t> last_kw;
      std::size_t k = n + 1;
      for (; k < text.size() && !is_terminator(text[k]); ++k) {
        if (std::find(slot.values.begin(), slot.values.end(), text[k]) != slot.values.end())
          last_kw = k;
      }
      if (last_kw) {
        Tokens span(text.begin() + static_cast<long>(n), text.begin() + static_cast<long>(*last_kw) + 1);
        found[slot.name] = join_tokens(span);
      }
      n = k;
    }
  }
  return found;
}

std::vector<std::string> new_slots(const SlotState& found, const SlotState& tags) {
  std::vector<std::string> out;
  for (const auto& [name, value] : found)
    if (!tags.contains(name)) out.push_back(name);
  return out;
}

int indicator(const Tokens& agent, const Tokens& user, const SlotState& tags,
              const SlotSchema& schema) {
  Tokens pair = agent;
  pair.insert(pair.end(), user.begin(), user.end());
  return new_slots(extract_slots(pair, schema), tags).empty() ? 0 : 1;
}

SlotState merge(SlotState tags, const SlotState& newer) {
  for (const auto& [name, value] : newer) tags[name] = value;
  return tags;
}

bool is_subset(const SlotState& a, const SlotState& b) {
  return std::all_of(a.begin(), a.end(), [&](const auto& kv) { return b.contains(kv.first); });
}

bool is_complete(const SlotState& tags, const SlotSchema& schema) {
  return std::all_of(schema.slots.begin(), schema.slots.end(),
                     [&](const SlotDef& s) { return tags.contains(s.name); });
}

}  // namespace samia
