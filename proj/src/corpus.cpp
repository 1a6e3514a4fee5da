#include "samia/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace samia {

using nlohmann::json;

std::string_view to_string(Role role) { return role == Role::User ? "user" : "agent"; }

namespace {

constexpr int kCorpusVersion = 1;
constexpr int kSchemaVersion = 1;

using Bank = std::vector<std::string>;

const std::map<std::string, Bank>& agent_questions() {
  static const std::map<std::string, Bank> bank = {
      {"taste",
       {"what would you like to drink ?", "what kind of coffee would you like to drink ?",
        "what coffee would you like ?", "which coffee do you want ?", "what can i get for you ?",
        "which drink would you like ?", "what flavor do you prefer ?", "may i know which coffee you want ?",
        "what would you like to get ?", "any preference for the coffee ?"}},
      {"size",
       {"what size would you like ?", "tall , grande or venti ?", "which cup size do you prefer ?",
        "what size do you want ?", "which size ?", "what cup size would you like ?",
        "may i know the size ?", "how big a cup would you like ?", "which size would suit you ?",
        "any preference for the cup size ?"}},
      {"temperature",
       {"hot or cold ?", "cold or hot ?", "would you like it hot or cold ?",
        "what temperature do you prefer ?", "hot or iced ?", "do you want it hot or cold ?",
        "which temperature would you like ?", "hot one or cold one ?", "should it be hot or iced ?",
        "do you prefer it hot or cold ?"}},
      {"address",
       {"where to send ?", "where to deliver ?", "what is the delivery address ?",
        "where should we deliver it ?", "may i have your address ?", "which address should i send it to ?",
        "where do you want it delivered ?", "what is your address ?", "where should i send it ?",
        "could you tell me the delivery address ?"}},
  };
  return bank;
}

// The agent repeats the value the user just gave; {v} is that value.
const Bank kVerifyQuestions = {"{v} , right ?", "so that is {v} ?", "just to confirm , {v} ?",
                               "you said {v} , correct ?", "{v} , is that right ?", "ok , {v} ?"};
const Bank kVerifyReplies = {"yes", "yes", "yes", "yes .", "right"};

const Bank kQuestionPrefixes = {"",           "ok , ",      "sure , ",     "alright , ",
                                "got it . ",   "great . ",   "thank you . ", "no problem . ",
                                "noted . ",    "okay . ",    "thanks . ",    "good choice . "};

const Bank kGreetings = {"", "hi ! ", "hello , ", "welcome ! "};

const Bank kConfirmPrefixes = {"", "ok , ", "great , ", "thank you , ", "perfect , ", "thanks , "};
const Bank kConfirmCores = {"your order has been placed .",       "your coffee order has been confirmed .",
                            "your order is confirmed .",          "your order will be placed very soon .",
                            "i have placed your order .",         "the order has been placed .",
                            "your order is placed now .",          "i have confirmed your order ."};
const Bank kPaymentNotes = {"please pay by clicking the link .", "link for payment will be sent shortly .",
                            "please click to view details and pay .",
                            "you can pay online after clicking the link .",
                            "the payment link is on its way .", "please check the link to pay ."};

const Bank kThanks = {"ok , thanks .", "ok , thanks .", "thank you .", "great , thanks ."};
const Bank kClosings = {"you are welcome .", "enjoy your coffee !", "thank you , have a nice day !",
                        "my pleasure .", "have a good day !", "bye , enjoy !"};

const Bank kOpenings = {"can you help me to order starbucks ?", "i want to order coffee",
                        "i 'd like a cup of coffee", "hi , i want to order a coffee"};

// {v} is replaced by the slot value.
const std::map<std::string, Bank>& user_answers() {
  static const std::map<std::string, Bank> bank = {
      {"taste", {"{v}", "{v} please", "i want a {v}", "a {v} , please"}},
      {"size", {"{v}", "{v} please", "{v} size", "the {v} size"}},
      {"temperature", {"{v}", "{v} please", "{v} , thanks"}},
      {"address", {"send it to {v}", "deliver to {v}", "{v}", "deliver it to {v}"}},
  };
  return bank;
}

const std::map<std::string, Bank>& opening_fragments() {
  static const std::map<std::string, Bank> bank = {
      {"taste", {"{v}", "a {v}", "i want a {v}"}},
      {"size", {"{v}", "{v} size", "the {v} size"}},
      {"temperature", {"{v}", "{v} please"}},
      {"address", {"send to {v}", "deliver to {v}", "{v}"}},
  };
  return bank;
}

const Bank kAddressTemplates = {
    "no . <num> {name} building , {area}", "<num> {name} road , {area}",
    "room <num> , {name} tower",           "no . <num> {name} street",
    "<num> {name} avenue , {area}",        "no . <num> building , {name} park , {area}",
};
const Bank kAddressNames = {"software", "dongfeng", "tonglinge", "garden",
                            "river",    "century",  "sunshine",  "harbor"};
const Bank kAddressAreas = {"zhongguancun", "yuexiu", "haidian", "pudong", "futian", "chaoyang"};

std::string replace_all(std::string text, const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
  return text;
}

class Generator {
 public:
  Generator(const SlotSchema& schema, std::uint64_t seed, const GeneratorOptions& options)
      : schema_(schema), rng_(seed), options_(options) {}

  Session session(int index) {
    Session s;
    char id[32];
    std::snprintf(id, sizeof(id), "s%06d", index);
    s.id = id;

    // goal holds the surface text the user types; order holds what extraction recovers
    SlotState goal;
    for (const auto& slot : schema_.slots) {
      goal[slot.name] = draw_value(slot);
      s.order[slot.name] = slot.kind == SlotKind::Lexicon
                               ? goal[slot.name]
                               : extract_slots(split_tokens(goal[slot.name]), schema_).at(slot.name);
    }

    // Opening: volunteer a random subset of the goal.
    auto names = schema_.names();
    std::shuffle(names.begin(), names.end(), rng_);
    const int max_vol = std::min<int>(options_.max_volunteered, static_cast<int>(names.size()) - 1);
    const int volunteered = uniform_int(0, std::max(0, max_vol));
    std::string opening = pick(kOpenings);
    if (volunteered > 0) {
      std::vector<std::string> frags;
      for (int k = 0; k < volunteered; ++k)
        frags.push_back(fill(pick(bank_for(opening_fragments(), names[k])), goal.at(names[k])));
      opening += " . ";
      for (std::size_t k = 0; k < frags.size(); ++k) opening += (k ? " , " : "") + frags[k];
    }
    SlotState tags;
    add_turn(s, Role::User, opening, tags);

    std::string last_answered;
    while (!is_complete(tags, schema_)) {
      if (!last_answered.empty() && bernoulli(options_.clarify)) {
        add_turn(s, Role::Agent, fill(pick(kVerifyQuestions), goal.at(last_answered)), tags);
        add_turn(s, Role::User, pick(kVerifyReplies), tags);
        last_answered.clear();
        continue;
      }
      std::vector<std::string> vacant;
      for (const auto& name : schema_.names())
        if (!tags.contains(name)) vacant.push_back(name);
      std::shuffle(vacant.begin(), vacant.end(), rng_);
      std::vector<std::string> asked{vacant[0]};
      if (vacant.size() >= 2 && bernoulli(options_.two_slot_question)) asked.push_back(vacant[1]);

      std::string question = s.turns.size() == 1 ? pick(kGreetings) : pick(kQuestionPrefixes);
      std::vector<std::size_t> cores;
      for (std::size_t k = 0; k < asked.size(); ++k) {
        const auto& bank = bank_for(agent_questions(), asked[k]);
        cores.push_back(draw_index(bank.size()));
        question += (k ? " " : "") + bank[cores.back()];
      }
      add_turn(s, Role::Agent, question, tags);
      add_turn(s, Role::User, answer(asked, cores, goal), tags);
      last_answered = asked[draw_index(asked.size())];
    }
    add_turn(s, Role::Agent, pick(kConfirmPrefixes) + pick(kConfirmCores) + " " + pick(kPaymentNotes), tags);
    if (bernoulli(options_.quick_question)) {
      const auto& entry = pick_entry(faq_table());
      add_turn(s, Role::User, pick(entry.questions), tags);
      add_turn(s, Role::Agent, pick(entry.answers), tags);
    } else if (bernoulli(options_.thanks)) {
      add_turn(s, Role::User, pick(kThanks), tags);
      add_turn(s, Role::Agent, pick(kClosings), tags);
    }
    return s;
  }

 private:
  // Slots outside the coffee schema get generic templates built from the slot name.
  const Bank& bank_for(const std::map<std::string, Bank>& banks, const std::string& slot) {
    if (auto it = banks.find(slot); it != banks.end()) return it->second;
    auto& cache = generic_[&banks];
    if (auto it = cache.find(slot); it != cache.end()) return it->second;
    Bank out;
    if (&banks == &agent_questions())
      out = {"what " + slot + " would you like ?", "which " + slot + " do you want ?",
             "please tell me the " + slot + " ?", "what " + slot + " do you prefer ?"};
    else
      out = {"{v}", "{v} please", "i want {v}"};
    return cache.emplace(slot, std::move(out)).first->second;
  }

  std::string draw_value(const SlotDef& slot) {
    if (slot.kind == SlotKind::Lexicon) return popular(slot.values);
    std::string text = pick(kAddressTemplates);
    text = replace_all(text, "{name}", popular(kAddressNames));
    text = replace_all(text, "{area}", popular(kAddressAreas));
    if (!std::any_of(slot.values.begin(), slot.values.end(),
                     [&](const std::string& kw) { return text.find(kw) != std::string::npos; }))
      text = "<num> " + pick(kAddressNames) + " " + slot.values.front();
    return text;
  }

  // Earlier entries are more popular, weight 1/(k+1).
  const std::string& popular(const Bank& bank) {
    std::vector<double> w;
    for (std::size_t k = 0; k < bank.size(); ++k) w.push_back(1.0 / static_cast<double>(k + 1));
    std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
    return bank[dist(rng_)];
  }

  // Users tend to mirror the question: each question form has a preferred answer form.
  std::string answer(const std::vector<std::string>& asked, const std::vector<std::size_t>& cores,
                     const SlotState& goal) {
    std::string out;
    for (std::size_t k = 0; k < asked.size(); ++k) {
      const auto& bank = bank_for(user_answers(), asked[k]);
      const auto& tmpl = bernoulli(options_.mirror) ? bank[cores[k] % bank.size()] : pick(bank);
      out += (k ? " , " : "") + fill(tmpl, goal.at(asked[k]));
    }
    return out;
  }

  static std::string fill(const std::string& tmpl, const std::string& value) {
    return replace_all(tmpl, "{v}", value);
  }

  void add_turn(Session& s, Role role, const std::string& text, SlotState& tags) {
    Turn t;
    t.role = role;
    t.text = split_tokens(text);
    t.tags_before = tags;
    // Tags record what the customer has stated; agent questions enumerate options.
    if (role == Role::User) tags = merge(tags, extract_slots(t.text, schema_));
    t.tags_after = tags;
    s.turns.push_back(std::move(t));
  }

  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform_int(0, static_cast<int>(v.size()) - 1))];
  }
  const FaqEntry& pick_entry(const std::vector<FaqEntry>& v) { return pick(v); }

  std::size_t draw_index(std::size_t n) { return static_cast<std::size_t>(uniform_int(0, static_cast<int>(n) - 1)); }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool bernoulli(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }

  const SlotSchema& schema_;
  std::mt19937_64 rng_;
  GeneratorOptions options_;
  std::map<const void*, std::map<std::string, Bank>> generic_;
};

}  // namespace

const std::vector<FaqEntry>& faq_table() {
  static const std::vector<FaqEntry> table = {
      {{"how long will it take ?", "when will it arrive ?"},
       {"usually about one hour .", "about <num> minutes ."}},
      {{"how to pay ?", "how can i pay ?"},
       {"please click the link to pay .", "you can pay online after clicking the link ."}},
  };
  return table;
}

const std::vector<std::string>& confirmation_templates() {
  static const std::vector<std::string> bank = [] {
    std::vector<std::string> out;
    for (const auto& prefix : kConfirmPrefixes)
      for (const auto& core : kConfirmCores)
        for (const auto& note : kPaymentNotes) out.push_back(prefix + core + " " + note);
    return out;
  }();
  return bank;
}

bool is_confirmation(const Tokens& agent_text) {
  auto has = [&](std::string_view w) {
    return std::find(agent_text.begin(), agent_text.end(), w) != agent_text.end();
  };
  return has("order") && (has("confirmed") || has("placed"));
}

std::vector<Session> generate_corpus(const SlotSchema& schema, int n_sessions, std::uint64_t seed,
                                     const GeneratorOptions& options) {
  if (n_sessions < 1) throw std::invalid_argument("generate_corpus: n_sessions must be >= 1");
  schema.validate();
  Generator gen(schema, seed, options);
  std::vector<Session> out;
  out.reserve(static_cast<std::size_t>(n_sessions));
  for (int i = 0; i < n_sessions; ++i) out.push_back(gen.session(i));
  return out;
}

CorpusSplit split_corpus(const std::vector<Session>& sessions, double train_ratio,
                         double validation_ratio, double test_ratio, std::uint64_t seed) {
  if (std::abs(train_ratio + validation_ratio + test_ratio - 1.0) > 1e-9)
    throw std::invalid_argument("split_corpus: ratios must sum to 1");
  if (train_ratio < 0 || validation_ratio < 0 || test_ratio < 0)
    throw std::invalid_argument("split_corpus: negative ratio");
  const std::size_t n = sessions.size();
  if (n < 3) throw std::invalid_argument("split_corpus: need at least 3 sessions");

  auto portion = [n](double r) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(r * static_cast<double>(n))));
  };
  std::size_t n_val = portion(validation_ratio);
  std::size_t n_test = portion(test_ratio);
  while (n_val + n_test > n - 1) {
    if (n_val >= n_test && n_val > 1) --n_val;
    else if (n_test > 1) --n_test;
    else break;
  }
  const std::size_t n_train = n - n_val - n_test;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  CorpusSplit split;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = sessions[order[k]];
    if (k < n_train) split.train.push_back(s);
    else if (k < n_train + n_val) split.validation.push_back(s);
    else split.test.push_back(s);
  }
  return split;
}

ParseError::ParseError(std::size_t line, const std::string& field, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ", field '" + field + "': " + what),
      line_(line),
      field_(field) {}

namespace {

json tags_to_json(const SlotState& tags) {
  json j = json::object();
  for (const auto& [k, v] : tags) j[k] = v;
  return j;
}

json session_to_json(const Session& s) {
  json turns = json::array();
  for (const auto& t : s.turns) {
    turns.push_back({{"role", to_string(t.role)},
                     {"text", join_tokens(t.text)},
                     {"tags_before", tags_to_json(t.tags_before)},
                     {"tags_after", tags_to_json(t.tags_after)}});
  }
  return {{"id", s.id}, {"turns", turns}, {"order", tags_to_json(s.order)}};
}

const json& require(const json& obj, const char* field, std::size_t line, const std::string& path) {
  if (!obj.is_object() || !obj.contains(field))
    throw ParseError(line, path + field, "missing");
  return obj.at(field);
}

std::string require_string(const json& obj, const char* field, std::size_t line,
                           const std::string& path) {
  const auto& v = require(obj, field, line, path);
  if (!v.is_string()) throw ParseError(line, path + field, "expected a string");
  return v.get<std::string>();
}

SlotState tags_from_json(const json& j, std::size_t line, const std::string& field) {
  if (!j.is_object()) throw ParseError(line, field, "expected an object");
  SlotState tags;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw ParseError(line, field + "." + k, "expected a string");
    tags[k] = v.get<std::string>();
  }
  return tags;
}

Session session_from_json(const json& j, std::size_t line) {
  Session s;
  s.id = require_string(j, "id", line, "");
  const auto& turns = require(j, "turns", line, "");
  if (!turns.is_array()) throw ParseError(line, "turns", "expected an array");
  for (std::size_t k = 0; k < turns.size(); ++k) {
    const std::string path = "turns[" + std::to_string(k) + "].";
    const auto& tj = turns[k];
    Turn t;
    const auto role = require_string(tj, "role", line, path);
    if (role == "user") t.role = Role::User;
    else if (role == "agent") t.role = Role::Agent;
    else throw ParseError(line, path + "role", "unknown role '" + role + "'");
    t.text = split_tokens(require_string(tj, "text", line, path));
    t.tags_before = tags_from_json(require(tj, "tags_before", line, path), line, path + "tags_before");
    t.tags_after = tags_from_json(require(tj, "tags_after", line, path), line, path + "tags_after");
    s.turns.push_back(std::move(t));
  }
  s.order = tags_from_json(require(j, "order", line, ""), line, "order");
  return s;
}

}  // namespace

void save_corpus(const std::filesystem::path& path, const std::vector<Session>& sessions) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write corpus file " + path.string());
  out << json{{"format", "samia-corpus"}, {"version", kCorpusVersion}}.dump() << '\n';
  for (const auto& s : sessions) out << session_to_json(s).dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Session> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read corpus file " + path.string());
  std::vector<Session> sessions;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, "<record>", e.what());
    }
    if (!header_seen) {
      header_seen = true;
      if (j.is_object() && j.contains("format")) {
        if (j["format"] != "samia-corpus") throw ParseError(lineno, "format", "not a corpus file");
        if (!j.contains("version") || j["version"] != kCorpusVersion)
          throw ParseError(lineno, "version", "unsupported corpus version");
        continue;
      }
    }
    sessions.push_back(session_from_json(j, lineno));
  }
  return sessions;
}

void save_schema(const std::filesystem::path& path, const SlotSchema& schema) {
  json slots = json::array();
  for (const auto& s : schema.slots)
    slots.push_back({{"name", s.name},
                     {"kind", s.kind == SlotKind::Address ? "address" : "lexicon"},
                     {"values", s.values}});
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write schema file " + path.string());
  out << json{{"format", "samia-schema"}, {"version", kSchemaVersion}, {"slots", slots}}.dump(2)
      << '\n';
}

SlotSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read schema file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ParseError(1, "<schema>", e.what());
  }
  if (!j.is_object() || j.value("format", "") != "samia-schema")
    throw ParseError(1, "format", "not a schema file");
  SlotSchema schema;
  const auto& slots = require(j, "slots", 1, "");
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const std::string path_k = "slots[" + std::to_string(k) + "].";
    SlotDef d;
    d.name = require_string(slots[k], "name", 1, path_k);
    const auto kind = require_string(slots[k], "kind", 1, path_k);
    if (kind == "address") d.kind = SlotKind::Address;
    else if (kind == "lexicon") d.kind = SlotKind::Lexicon;
    else throw ParseError(1, path_k + "kind", "unknown kind '" + kind + "'");
    const auto& values = require(slots[k], "values", 1, path_k);
    for (const auto& v : values) d.values.push_back(v.get<std::string>());
    schema.slots.push_back(std::move(d));
  }
  schema.validate();
  return schema;
}

}  // namespace samia
