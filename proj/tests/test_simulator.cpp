#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "samia/simulator.hpp"

using namespace samia;

namespace {

const SlotState kGoal = {{"taste", "mocha"}, {"size", "venti"}, {"temperature", "cold"}, {"address", "<num> river road"}};

Tokens ask(const std::string& slot) {
  if (slot == "taste") return split_tokens("what coffee would you like ?");
  if (slot == "size") return split_tokens("what size ?");
  if (slot == "temperature") return split_tokens("hot or cold ?");
  return split_tokens("where to send ?");
}

// Asks the first vacant slot once; confirms when nothing is vacant.
Tokens perfect_agent(const AgentInput& in, const SlotSchema& schema) {
  for (const auto& name : schema.names())
    if (!in.tags.contains(name)) return ask(name);
  return split_tokens("your order has been placed .");
}

}  // namespace

TEST_CASE("rule user answers what is asked") {
  const auto schema = SlotSchema::coffee();
  const RuleUser user(schema, kGoal);
  CHECK(user.reply(split_tokens("what size would you like ?"), {}) == Tokens{"venti"});
  CHECK(user.reply(split_tokens("what would you like to drink ? where to send ?"), {}) ==
        split_tokens("mocha , <num> river road"));
  CHECK(user.reply(split_tokens("how long will it take ?"), {}) == split_tokens("usually about one hour ."));
  CHECK(user.reply(split_tokens("your order has been placed . please pay by clicking the link ."), {}) ==
        split_tokens("ok , thanks ."));
  CHECK(user.reply(split_tokens("hello there ."), {}) == RuleUser::null_reply());
  CHECK(user.reply({}, {}) == RuleUser::null_reply());
}

TEST_CASE("a keyword counts only inside a question clause") {
  const RuleUser user(SlotSchema::coffee(), kGoal);
  CHECK(user.asked_slots(split_tokens("nice size . where to send ?")) == std::vector<std::string>{"address"});
  CHECK(user.asked_slots(split_tokens("what size")).empty());
  CHECK(user.asked_slots(split_tokens("hot or cold ? ok .")) == std::vector<std::string>{"temperature"});
  CHECK(user.asked_slots(split_tokens("where ? what size ?")) == std::vector<std::string>{"size", "address"});
}

TEST_CASE("rule user is deterministic and needs a full goal") {
  const auto schema = SlotSchema::coffee();
  const RuleUser a(schema, kGoal), b(schema, kGoal);
  const Tokens q = split_tokens("tall , grande or venti ?");
  CHECK(a.reply(q, {}) == b.reply(q, {}));
  CHECK(a.reply(q, {}) == a.reply(q, {{"size", "tall"}}));
  SlotState partial = kGoal;
  partial.erase("size");
  CHECK_THROWS_AS(RuleUser(schema, partial), std::invalid_argument);
}

TEST_CASE("drawn goals are complete and extractable") {
  const auto schema = SlotSchema::coffee();
  std::mt19937_64 rng(12);
  for (int k = 0; k < 200; ++k) {
    const SlotState goal = RuleUser::draw_goal(schema, rng);
    REQUIRE(is_complete(goal, schema));
    for (const auto& [slot, value] : goal) {
      const SlotState found = extract_slots(split_tokens(value), schema);
      REQUIRE(found.contains(slot));
      CHECK(found.at(slot) == value);
    }
  }
}

TEST_CASE("opening volunteers at most three goal values") {
  const auto schema = SlotSchema::coffee();
  const RuleUser user(schema, kGoal);
  std::mt19937_64 rng(2);
  std::set<std::size_t> sizes;
  for (int k = 0; k < 200; ++k) {
    const SlotState found = extract_slots(user.opening(rng), schema);
    CHECK(found.size() <= 3);
    for (const auto& [slot, value] : found) CHECK(kGoal.at(slot) == value);
    sizes.insert(found.size());
  }
  CHECK(sizes == std::set<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("perfect agent earns one reward per slot not volunteered") {
  const auto schema = SlotSchema::coffee();
  std::mt19937_64 goals(77);
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const SlotState goal = RuleUser::draw_goal(schema, goals);
    const RuleUser user(schema, goal);
    std::mt19937_64 rng(seed);
    const auto tr = rollout([&](const AgentInput& in) { return perfect_agent(in, schema); }, user, schema, 10, rng,
                            goal);
    const auto volunteered = tr.turns.front().tags_after.size();
    CHECK(tr.total_reward() == static_cast<int>(schema.slots.size() - volunteered));
    CHECK(tr.final_tags == goal);
    for (int r : tr.rewards) CHECK(r == 1);
  }
}

TEST_CASE("repeating one question earns at most one reward") {
  const auto schema = SlotSchema::coffee();
  const RuleUser user(schema, kGoal);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto tr = rollout([](const AgentInput&) { return split_tokens("what size ?"); }, user, schema, 8, rng);
    CHECK(tr.total_reward() <= 1);
    CHECK(tr.final_tags.contains("size"));
  }
}

TEST_CASE("rollout stops on a confirmation with zero reward") {
  const auto schema = SlotSchema::coffee();
  const RuleUser user(schema, kGoal);
  std::mt19937_64 rng(1);
  const auto tr =
      rollout([](const AgentInput&) { return split_tokens("your order is confirmed ."); }, user, schema, 5, rng);
  CHECK(tr.turns.size() == 2);
  CHECK(tr.rewards == std::vector<int>{0});
}

TEST_CASE("seeded rollouts are reproducible") {
  const auto schema = SlotSchema::coffee();
  const RuleUser user(schema, kGoal);
  auto policy = [&](const AgentInput& in) { return perfect_agent(in, schema); };
  std::mt19937_64 r1(5), r2(5);
  const auto a = rollout(policy, user, schema, 10, r1, kGoal);
  const auto b = rollout(policy, user, schema, 10, r2, kGoal);
  REQUIRE(a.turns.size() == b.turns.size());
  for (std::size_t k = 0; k < a.turns.size(); ++k) CHECK(a.turns[k].text == b.turns[k].text);
  CHECK(a.rewards == b.rewards);

  const auto dir = std::filesystem::temp_directory_path() / "samia_test_sim";
  std::filesystem::create_directories(dir);
  save_transcripts(dir / "a.jsonl", {a, b});
  std::ifstream in(dir / "a.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 3);
}

TEST_CASE("criterion reward") {
  const auto schema = SlotSchema::coffee();
  const RuleUser user(schema, kGoal);
  CHECK(criterion_reward(split_tokens("hot or cold ?"), {{{"taste", "mocha"}}, {}}, user, schema) == 1);
  CHECK(criterion_reward(split_tokens("hot or cold ?"), {{{"temperature", "cold"}}, {}}, user, schema) == 0);
  CHECK(criterion_reward({}, {{}, {}}, user, schema) == 0);
  CHECK(criterion_reward(split_tokens("your order has been placed ."), {kGoal, {}}, user, schema) == 0);
  CHECK(criterion_reward(split_tokens("hello ."), {{}, {}}, user, schema) == 0);
}

TEST_CASE("rule user recognizes every corpus question") {
  // Each generator question must be read by the rule user as asking the slots its answer fills.
  const auto schema = SlotSchema::coffee();
  const auto sessions = generate_corpus(schema, 300, 9);
  for (const auto& s : sessions) {
    const RuleUser user(schema, s.order);
    for (std::size_t k = 0; k + 1 < s.turns.size(); ++k) {
      const auto& a = s.turns[k];
      const auto& o = s.turns[k + 1];
      if (a.role != Role::Agent) continue;
      const auto filled = new_slots(extract_slots(o.text, schema), a.tags_before);
      const auto asked = user.asked_slots(a.text);
      for (const auto& slot : filled) {
        INFO(join_tokens(a.text));
        CHECK(std::find(asked.begin(), asked.end(), slot) != asked.end());
      }
      if (!filled.empty()) CHECK(criterion_reward(a.text, {a.tags_before, {}}, user, schema) == 1);
    }
  }
}
