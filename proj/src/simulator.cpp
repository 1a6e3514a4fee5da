#include "samia/simulator.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace samia {

namespace {

using json = nlohmann::json;

Tokens concat(const Tokens& a, const Tokens& b) {
  Tokens out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

bool is_terminator(const std::string& t) { return t == "." || t == "?" || t == "!"; }

const std::map<std::string, std::vector<std::string>>& coffee_keywords() {
  static const std::map<std::string, std::vector<std::string>> k = {
      {"taste", {"coffee", "drink", "taste", "flavor", "get"}},
      {"size", {"size", "cup", "tall", "medium", "grande", "venti"}},
      {"temperature", {"hot", "cold", "temperature", "iced"}},
      {"address", {"where", "address", "deliver", "send"}},
  };
  return k;
}

}  // namespace

RuleUser::RuleUser(const SlotSchema& schema, SlotState goal)
    : schema_(schema), goal_(std::move(goal)), keywords_(question_keywords(schema)) {
  for (const auto& slot : schema_.slots)
    if (!goal_.contains(slot.name)) throw std::invalid_argument("RuleUser: goal lacks slot '" + slot.name + "'");
}

SlotState RuleUser::draw_goal(const SlotSchema& schema, std::mt19937_64& rng) {
  auto pick = [&](const std::vector<std::string>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  static const std::vector<std::string> names = {"software", "dongfeng", "garden", "river", "century"};
  SlotState goal;
  for (const auto& slot : schema.slots) {
    if (slot.kind == SlotKind::Lexicon) goal[slot.name] = pick(slot.values);
    else goal[slot.name] = std::string(kNumToken) + " " + pick(names) + " " + pick(slot.values);
  }
  return goal;
}

std::map<std::string, std::vector<std::string>> RuleUser::question_keywords(const SlotSchema& schema) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& slot : schema.slots) {
    auto& kw = out[slot.name];
    if (auto it = coffee_keywords().find(slot.name); it != coffee_keywords().end()) {
      kw = it->second;
      continue;
    }
    kw.push_back(slot.name);
    if (slot.kind == SlotKind::Address) {
      kw.insert(kw.end(), {"where", "address"});
    } else {
      for (const auto& v : slot.values)
        if (v.find(' ') == std::string::npos) kw.push_back(v);
    }
  }
  return out;
}

std::vector<std::string> RuleUser::asked_slots(const Tokens& agent_text) const {
  std::vector<bool> asked(schema_.slots.size(), false);
  std::size_t start = 0;
  for (std::size_t i = 0; i < agent_text.size(); ++i) {
    if (!is_terminator(agent_text[i])) continue;
    if (agent_text[i] == "?") {
      for (std::size_t s = 0; s < schema_.slots.size(); ++s) {
        const auto& kw = keywords_.at(schema_.slots[s].name);
        for (std::size_t j = start; j < i && !asked[s]; ++j)
          asked[s] = std::find(kw.begin(), kw.end(), agent_text[j]) != kw.end();
      }
    }
    start = i + 1;
  }
  std::vector<std::string> out;
  for (std::size_t s = 0; s < asked.size(); ++s)
    if (asked[s]) out.push_back(schema_.slots[s].name);
  return out;
}

const Tokens& RuleUser::null_reply() {
  static const Tokens t = {"sorry", "?"};
  return t;
}

Tokens RuleUser::opening(std::mt19937_64& rng) const {
  auto names = schema_.names();
  std::shuffle(names.begin(), names.end(), rng);
  const int most = std::min<int>(3, static_cast<int>(names.size()) - 1);
  const int k = std::uniform_int_distribution<int>(0, std::max(0, most))(rng);
  std::string text = "i want to order coffee";
  for (int i = 0; i < k; ++i) text += (i == 0 ? " . " : " , ") + goal_.at(names[static_cast<std::size_t>(i)]);
  return split_tokens(text);
}

Tokens RuleUser::reply(const Tokens& agent_text, const SlotState&) const {
  const auto asked = asked_slots(agent_text);
  if (!asked.empty()) {
    std::string text;
    for (std::size_t k = 0; k < asked.size(); ++k) text += (k ? " , " : "") + goal_.at(asked[k]);
    return split_tokens(text);
  }
  const std::string joined = join_tokens(agent_text);
  for (const auto& entry : faq_table())
    if (std::find(entry.questions.begin(), entry.questions.end(), joined) != entry.questions.end())
      return split_tokens(entry.answers.front());
  if (is_confirmation(agent_text)) return {"ok", ",", "thanks", "."};
  return null_reply();
}

int Transcript::total_reward() const {
  int s = 0;
  for (int r : rewards) s += r;
  return s;
}

Transcript rollout(const AgentPolicy& agent, const SimulatedUser& user, const SlotSchema& schema,
                   int max_turns, std::mt19937_64& rng, const SlotState& goal) {
  if (max_turns < 1) throw std::invalid_argument("rollout: max_turns must be >= 1");
  Transcript tr;
  tr.goal = goal;
  SlotState tags;
  auto push = [&](Role role, const Tokens& text, const SlotState& after) {
    Turn t;
    t.role = role;
    t.text = text;
    t.tags_before = tags;
    t.tags_after = after;
    tr.turns.push_back(std::move(t));
  };

  Tokens user_text = user.opening(rng);
  const SlotState opened = merge(tags, extract_slots(user_text, schema));
  push(Role::User, user_text, opened);
  tags = opened;

  for (int turn = 0; turn < max_turns; ++turn) {
    const Tokens a = agent({tags, user_text});
    push(Role::Agent, a, tags);
    if (is_confirmation(a)) {
      tr.rewards.push_back(0);
      break;
    }
    const Tokens o = user.reply(a, tags);
    tr.rewards.push_back(indicator(a, o, tags, schema));
    const SlotState after = merge(tags, extract_slots(concat(a, o), schema));
    push(Role::User, o, after);
    tags = after;
    user_text = o;
    if (is_complete(tags, schema)) break;
  }
  tr.final_tags = tags;
  return tr;
}

int criterion_reward(const Tokens& response, const AgentInput& input, const RuleUser& user,
                     const SlotSchema& schema) {
  if (response.empty()) return 0;
  return indicator(response, user.reply(response, input.tags), input.tags, schema);
}

AgentPolicy greedy_policy(const Seq2SeqParams& agent, const Vocabulary& vocab, const SlotSchema& schema,
                          int max_len, bool with_tags) {
  return [&agent, &vocab, &schema, max_len, with_tags](const AgentInput& in) {
    std::mt19937_64 unused(0);
    const Ids ids = encode_agent_input(in, vocab, schema, max_len, with_tags);
    return decode(sample(agent, ids, max_len, unused, true).ids, vocab);
  };
}

void save_transcripts(const std::filesystem::path& path, const std::vector<Transcript>& transcripts) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write transcript file " + path.string());
  out << json{{"format", "samia-transcripts"}, {"version", 1}}.dump() << '\n';
  for (const auto& t : transcripts) {
    json turns = json::array();
    for (const auto& turn : t.turns) turns.push_back({{"role", to_string(turn.role)}, {"text", join_tokens(turn.text)}});
    out << json{{"goal", t.goal}, {"turns", turns}, {"rewards", t.rewards}, {"final_tags", t.final_tags}}.dump()
        << '\n';
  }
}

}  // namespace samia
