#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "samia/config.hpp"
#include "samia/corpus.hpp"
#include "samia/text.hpp"
#include "samia/user_model.hpp"

using namespace samia;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "samia_unit";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<Session>& reference_corpus() {
  static const auto c = generate_corpus(SlotSchema::coffee(), 2000, 1);
  return c;
}

}  // namespace

TEST_CASE("generated sessions satisfy the structural contract") {
  const auto schema = SlotSchema::coffee();
  const auto sessions = generate_corpus(schema, 100, 7);
  REQUIRE(sessions.size() == 100);
  for (const auto& s : sessions) {
    REQUIRE(!s.turns.empty());
    CHECK(s.turns.front().role == Role::User);
    CHECK(s.turns.back().role == Role::Agent);
    CHECK(is_complete(s.order, schema));
    CHECK(s.turns.back().tags_after == s.order);
    SlotState running;
    for (std::size_t k = 0; k < s.turns.size(); ++k) {
      const auto& t = s.turns[k];
      if (k > 0) CHECK(t.role != s.turns[k - 1].role);
      CHECK(is_subset(t.tags_before, t.tags_after));
      CHECK(t.tags_before == running);
      // tags follow from re-extracting what the customer typed
      if (t.role == Role::User) running = merge(running, extract_slots(t.text, schema));
      CHECK(t.tags_after == running);
    }
  }
}

TEST_CASE("generation is deterministic and rejects bad input") {
  const auto a = scratch("a.jsonl"), b = scratch("b.jsonl");
  save_corpus(a, generate_corpus(SlotSchema::coffee(), 50, 7));
  save_corpus(b, generate_corpus(SlotSchema::coffee(), 50, 7));
  CHECK(slurp(a) == slurp(b));
  CHECK_THROWS(generate_corpus(SlotSchema::coffee(), 0, 7));
  SlotSchema bad = SlotSchema::coffee();
  bad.slots[2].values.clear();
  CHECK_THROWS(generate_corpus(bad, 5, 7));
}

TEST_CASE("quick questions and two-slot questions both occur") {
  int faq = 0, two = 0;
  for (const auto& s : reference_corpus()) {
    for (const auto& t : s.turns) {
      if (t.role == Role::User)
        for (const auto& entry : faq_table())
          for (const auto& q : entry.questions)
            if (join_tokens(t.text) == q) ++faq;
      if (t.role == Role::Agent && std::count(t.text.begin(), t.text.end(), "?") == 2) ++two;
    }
  }
  // 0.2 per session over 2000 sessions: 400 expected, sd about 18
  CHECK(faq > 340);
  CHECK(faq < 460);
  CHECK(two > 100);
}

TEST_CASE("reference corpus session length") {
  double turns = 0;
  for (const auto& s : reference_corpus()) turns += static_cast<double>(s.turns.size());
  const double mean = turns / 2000.0;
  CHECK(mean > 6.0);
  CHECK(mean < 12.0);
}

TEST_CASE("split sizes and partition") {
  const auto sessions = generate_corpus(SlotSchema::coffee(), 10, 3);
  const auto sp = split_corpus(sessions, 0.8, 0.1, 0.1, 5);
  CHECK(sp.train.size() == 8);
  CHECK(sp.validation.size() == 1);
  CHECK(sp.test.size() == 1);
  std::set<std::string> ids;
  for (const auto* part : {&sp.train, &sp.validation, &sp.test})
    for (const auto& s : *part) CHECK(ids.insert(s.id).second);
  CHECK(ids.size() == 10);

  const auto three = split_corpus(generate_corpus(SlotSchema::coffee(), 3, 3), 0.8, 0.1, 0.1, 5);
  CHECK(three.train.size() == 1);
  CHECK(three.validation.size() == 1);
  CHECK(three.test.size() == 1);
  CHECK_THROWS(split_corpus(generate_corpus(SlotSchema::coffee(), 2, 3), 0.8, 0.1, 0.1, 5));
  CHECK_THROWS(split_corpus(sessions, 0.8, 0.1, 0.2, 5));
  const auto again = split_corpus(sessions, 0.8, 0.1, 0.1, 5);
  CHECK(again.test.front().id == sp.test.front().id);
}

TEST_CASE("corpus file round trip and errors") {
  const auto p = scratch("rt.jsonl");
  const auto one = generate_corpus(SlotSchema::coffee(), 1, 0);
  save_corpus(p, one);
  CHECK(load_corpus(p) == one);

  std::ofstream(scratch("empty.jsonl")).close();
  CHECK(load_corpus(scratch("empty.jsonl")).empty());

  {
    std::ofstream out(scratch("bad.jsonl"));
    out << R"({"format":"samia-corpus","version":1})" << '\n';
    out << R"({"id":"x","turns":[{"text":"hi","tags_before":{},"tags_after":{}}],"order":{}})" << '\n';
  }
  try {
    load_corpus(scratch("bad.jsonl"));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.field() == "turns[0].role");
  }
}

TEST_CASE("schema file round trip") {
  const auto p = scratch("schema.json");
  save_schema(p, SlotSchema::coffee());
  const auto s = load_schema(p);
  REQUIRE(s.slots.size() == 4);
  CHECK(s.slots[3].kind == SlotKind::Address);
  CHECK(s.slots[0].values == SlotSchema::coffee().slots[0].values);
}

TEST_CASE("tokenizer") {
  CHECK(tokenize("Caramel Macchiato, the medium size") ==
        Tokens{"caramel", "macchiato", ",", "the", "medium", "size"});
  CHECK(tokenize("No. 18 Software Road") == Tokens{"no", ".", "<num>", "software", "road"});
  CHECK(tokenize("about <NUM> minutes") == Tokens{"about", "<num>", "minutes"});
}

TEST_CASE("vocabulary frequency floor and ordering") {
  Session s;
  Turn t;
  t.text = {"hot", "hot", "hot", "hot", "hot", "cold"};
  s.turns.push_back(t);
  const auto v = build_vocab({s}, 2);
  CHECK(v.contains("hot"));
  CHECK_FALSE(v.contains("cold"));
  CHECK(encode({"cold"}, v, 5) == Ids{Vocabulary::kUnk, Vocabulary::kEos});
  CHECK(encode({"hot"}, v, 5) == Ids{v.id("hot"), Vocabulary::kEos});
  CHECK(v.token(Vocabulary::kSep) == "<sep>");
  CHECK(v.contains("<taste>"));
  CHECK_THROWS(build_vocab({s}, 0));
  CHECK_THROWS(build_vocab({}, 1));
}

TEST_CASE("reference corpus vocabulary size and determinism") {
  const auto a = build_vocab(reference_corpus(), 2);
  const auto b = build_vocab(reference_corpus(), 2);
  CHECK(a == b);
  CHECK(a.size() >= 60);
  CHECK(a.size() <= 400);
}

TEST_CASE("encode truncation and decode round trip") {
  const auto v = build_vocab(reference_corpus(), 2);
  Tokens long_text(100, "latte");
  const auto ids = encode(long_text, v, 30);
  CHECK(ids.size() == 30);
  CHECK(ids.back() == Vocabulary::kEos);
  CHECK_THROWS(encode(long_text, v, 1));

  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    Tokens x;
    const auto n = rng() % 20;
    for (std::size_t k = 0; k < n; ++k) x.push_back(v.token(6 + static_cast<int>(rng() % (v.size() - 6))));
    CHECK(decode(encode(x, v, 30), v) == x);
  }

  const auto p = scratch("vocab.txt");
  save_vocab(p, v);
  CHECK(load_vocab(p) == v);
}

TEST_CASE("user pairs") {
  const auto sessions = generate_corpus(SlotSchema::coffee(), 30, 9);
  std::size_t expected = 0;
  for (const auto& s : sessions)
    for (std::size_t k = 0; k + 1 < s.turns.size(); ++k)
      if (s.turns[k].role == Role::Agent && s.turns[k + 1].role == Role::User) ++expected;
  const auto pairs = extract_user_pairs(sessions);
  CHECK(pairs.size() == expected);

  Session table;
  auto add = [&](Role r, const std::string& text) {
    Turn t;
    t.role = r;
    t.text = split_tokens(text);
    table.turns.push_back(t);
  };
  add(Role::User, "i want a latte");
  add(Role::Agent, "hot ?");
  add(Role::User, "hot");
  add(Role::Agent, "your order has been placed .");
  const auto tp = extract_user_pairs({table});
  REQUIRE(tp.size() == 1);
  CHECK(join_tokens(tp[0].input) == "hot ?");
  CHECK(join_tokens(tp[0].target) == "hot");
}

TEST_CASE("config parsing") {
  const Config c = parse_config("# comment\nseed = 9\nbeam_width = 7\nsl_rl_ratio = 2:1\n");
  CHECK(c.seed == 9);
  CHECK(c.beam_width == 7);
  CHECK(c.sl_steps == 2);
  CHECK(c.rl_steps == 1);
  CHECK(parse_config(to_text(c)).beam_width == 7);
  try {
    parse_config("no_such_key = 1\n");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "no_such_key");
  }
  CHECK_THROWS_AS(parse_config("beam_width = 0\n"), ConfigError);
}
