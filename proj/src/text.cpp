#include "samia/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

namespace samia {

namespace {
constexpr std::string_view kVocabHeader = "# samia-vocab v1";
}

Tokens tokenize(std::string_view raw) {
  Tokens out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  std::size_t i = 0;
  while (i < raw.size()) {
    const auto c = static_cast<unsigned char>(raw[i]);
    if (c == '<' && i + 5 <= raw.size()) {
      std::string probe(raw.substr(i, 5));
      std::transform(probe.begin(), probe.end(), probe.begin(), ::tolower);
      if (probe == kNumToken) {
        flush();
        out.emplace_back(kNumToken);
        i += 5;
        continue;
      }
    }
    if (std::isspace(c)) {
      flush();
      ++i;
    } else if (std::isdigit(c)) {
      flush();
      while (i < raw.size() && std::isdigit(static_cast<unsigned char>(raw[i]))) ++i;
      out.emplace_back(kNumToken);
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
      ++i;
    } else {
      word += static_cast<char>(std::tolower(c));
      ++i;
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() <= kSep || tokens_[kPad] != "<pad>" || tokens_[kBos] != "<bos>" ||
      tokens_[kEos] != "<eos>" || tokens_[kUnk] != "<unk>" || tokens_[kNum] != kNumToken ||
      tokens_[kSep] != "<sep>")
    throw std::invalid_argument("vocabulary: missing special token block");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw std::invalid_argument("vocabulary: duplicate token '" + tokens_[i] + "'");
  }
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("vocabulary: id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::marker_id(std::string_view slot) const {
  auto it = index_.find(slot_marker(slot));
  if (it == index_.end())
    throw std::invalid_argument("vocabulary: no marker for slot '" + std::string(slot) + "'");
  return it->second;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= '\n';
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> special_tokens(const SlotSchema& schema) {
  std::vector<std::string> out = {"<pad>", "<bos>", "<eos>", "<unk>", std::string(kNumToken), "<sep>"};
  for (const auto& slot : schema.slots) out.push_back(Vocabulary::slot_marker(slot.name));
  return out;
}

Vocabulary build_vocab(const std::vector<Session>& sessions, int min_freq, const SlotSchema& schema) {
  if (min_freq < 1) throw std::invalid_argument("build_vocab: min_freq must be >= 1");
  if (sessions.empty()) throw std::invalid_argument("build_vocab: empty corpus");

  std::map<std::string, long> counts;
  for (const auto& s : sessions)
    for (const auto& t : s.turns)
      for (const auto& tok : t.text) ++counts[tok];

  auto tokens = special_tokens(schema);
  std::vector<std::pair<std::string, long>> ranked;
  for (const auto& [tok, n] : counts) {
    if (n < min_freq) continue;
    if (std::find(tokens.begin(), tokens.end(), tok) != tokens.end()) continue;
    ranked.emplace_back(tok, n);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (auto& [tok, n] : ranked) tokens.push_back(tok);
  return Vocabulary(std::move(tokens));
}

Ids encode(const Tokens& text, const Vocabulary& vocab, int max_len) {
  if (max_len < 2) throw std::invalid_argument("encode: max_len must be >= 2");
  Ids ids;
  const std::size_t keep = std::min(text.size(), static_cast<std::size_t>(max_len - 1));
  ids.reserve(keep + 1);
  for (std::size_t i = 0; i < keep; ++i) ids.push_back(vocab.id(text[i]));
  ids.push_back(Vocabulary::kEos);
  return ids;
}

Tokens decode(const Ids& ids, const Vocabulary& vocab) {
  Tokens out;
  for (int id : ids) {
    if (id == Vocabulary::kEos) break;
    if (id == Vocabulary::kPad || id == Vocabulary::kBos) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

void save_vocab(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write vocabulary file " + path.string());
  out << kVocabHeader << '\n';
  out << "# specials:";
  for (const auto& t : vocab.tokens()) {
    if (t.size() < 2 || t.front() != '<' || t.back() != '>') break;
    out << ' ' << t;
  }
  out << '\n';
  for (const auto& t : vocab.tokens()) out << t << '\n';
}

Vocabulary load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocabulary file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kVocabHeader)
    throw std::runtime_error(path.string() + ": line 1: expected '" + std::string(kVocabHeader) + "'");
  if (!std::getline(in, line) || line.rfind("# specials:", 0) != 0)
    throw std::runtime_error(path.string() + ": line 2: expected special-token block");
  std::vector<std::string> tokens;
  while (std::getline(in, line)) {
    if (line.empty()) throw std::runtime_error(path.string() + ": empty token line");
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

}  // namespace samia
