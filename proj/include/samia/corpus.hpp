#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "samia/slots.hpp"

namespace samia {

enum class Role { User, Agent };

std::string_view to_string(Role role);

struct Turn {
  Role role = Role::User;
  Tokens text;
  SlotState tags_before;
  SlotState tags_after;

  bool operator==(const Turn&) const = default;
};

struct Session {
  std::string id;
  std::vector<Turn> turns;
  SlotState order;

  bool operator==(const Session&) const = default;
};

/// Knobs of the synthetic generator. The defaults produce the reference corpus.
struct GeneratorOptions {
  int max_volunteered = 3;         // opening volunteers 0..max_volunteered slots
  double two_slot_question = 0.3;  // agent asks for two vacant slots in one turn
  double quick_question = 0.2;     // per session, after confirmation
  double clarify = 0.2;            // agent verifies a value the user just gave
  double mirror = 0.9;             // user answers in the form matching the question
  double thanks = 0.8;             // user thanks the agent after the confirmation (no quick question)
};

std::vector<Session> generate_corpus(const SlotSchema& schema, int n_sessions, std::uint64_t seed,
                                     const GeneratorOptions& options = {});

struct CorpusSplit {
  std::vector<Session> train;
  std::vector<Session> validation;
  std::vector<Session> test;
};

/// Session-level split. Every part receives at least one session.
CorpusSplit split_corpus(const std::vector<Session>& sessions, double train_ratio,
                         double validation_ratio, double test_ratio, std::uint64_t seed);

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& field, const std::string& what);
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

/// JSON-lines file: a header record, then one session per line.
void save_corpus(const std::filesystem::path& path, const std::vector<Session>& sessions);
std::vector<Session> load_corpus(const std::filesystem::path& path);

void save_schema(const std::filesystem::path& path, const SlotSchema& schema);
SlotSchema load_schema(const std::filesystem::path& path);

/// Canned replies to the quick questions users ask after ordering.
struct FaqEntry {
  std::vector<std::string> questions;
  std::vector<std::string> answers;
};
const std::vector<FaqEntry>& faq_table();

/// Agent utterances that close an order.
const std::vector<std::string>& confirmation_templates();
bool is_confirmation(const Tokens& agent_text);

}  // namespace samia
