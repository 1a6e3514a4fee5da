#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "samia/agent_model.hpp"
#include "samia/corpus.hpp"
#include "samia/slots.hpp"

namespace samia {

/// A user that can open a dialogue and answer agent turns.
class SimulatedUser {
 public:
  virtual ~SimulatedUser() = default;
  virtual Tokens opening(std::mt19937_64& rng) const = 0;
  virtual Tokens reply(const Tokens& agent_text, const SlotState& tags) const = 0;
};

/// Handcrafted evaluation user with a hidden goal. A slot counts as asked when
/// one of its keywords occurs in a clause of the agent turn that ends with "?".
class RuleUser : public SimulatedUser {
 public:
  RuleUser(const SlotSchema& schema, SlotState goal);

  /// Fully specified goal: lexicon values drawn uniformly, addresses built from
  /// the address keywords.
  static SlotState draw_goal(const SlotSchema& schema, std::mt19937_64& rng);

  /// Keywords that mark a question about each slot.
  static std::map<std::string, std::vector<std::string>> question_keywords(const SlotSchema& schema);

  /// Slots asked about in `agent_text`, in schema order.
  std::vector<std::string> asked_slots(const Tokens& agent_text) const;

  Tokens opening(std::mt19937_64& rng) const override;
  Tokens reply(const Tokens& agent_text, const SlotState& tags) const override;

  const SlotState& goal() const { return goal_; }

  static const Tokens& null_reply();

 private:
  SlotSchema schema_;
  SlotState goal_;
  std::map<std::string, std::vector<std::string>> keywords_;
};

using AgentPolicy = std::function<Tokens(const AgentInput&)>;

struct Transcript {
  SlotState goal;
  std::vector<Turn> turns;
  std::vector<int> rewards;  // one per agent turn
  SlotState final_tags;
  int total_reward() const;
};

/// Opening from the user, then agent/user exchanges. Each exchange is scored
/// with the indicator against the running tags, which then absorb the slots of
/// the exchange. Stops on a confirmation, on full tags, or after max_turns
/// exchanges.
Transcript rollout(const AgentPolicy& agent, const SimulatedUser& user, const SlotSchema& schema,
                   int max_turns, std::mt19937_64& rng, const SlotState& goal = {});

/// I(A, O | tags) with O the rule user's reply.
int criterion_reward(const Tokens& response, const AgentInput& input, const RuleUser& user,
                     const SlotSchema& schema);

/// Greedy policy over a tagged agent model.
AgentPolicy greedy_policy(const Seq2SeqParams& agent, const Vocabulary& vocab, const SlotSchema& schema,
                          int max_len, bool with_tags);

/// One JSON record per line: goal, turns, rewards, final tags.
void save_transcripts(const std::filesystem::path& path, const std::vector<Transcript>& transcripts);

}  // namespace samia
