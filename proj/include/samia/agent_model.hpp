#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "samia/config.hpp"
#include "samia/corpus.hpp"
#include "samia/seq2seq.hpp"
#include "samia/slots.hpp"
#include "samia/text.hpp"
#include "samia/trainer.hpp"

namespace samia {

/// What the agent sees on its turn: the filled slots and the last user utterance.
struct AgentInput {
  SlotState tags;
  Tokens user_text;
};

struct AgentExample {
  AgentInput input;
  Tokens target;
};

/// One example per agent turn: (tags_before, preceding user turn) -> agent turn.
std::vector<AgentExample> extract_agent_examples(const std::vector<Session>& sessions);

/// [<slot> value ... for each filled slot in schema order] <sep> utterance <eos>.
/// Without tags the segment is empty and the sequence starts at <sep>. When
/// too long, the utterance tail is dropped; the tag segment is never cut.
Ids encode_agent_input(const AgentInput& input, const Vocabulary& vocab, const SlotSchema& schema,
                       int max_len, bool with_tags = true);

std::vector<Example> to_examples(const std::vector<AgentExample>& examples, const Vocabulary& vocab,
                                 const SlotSchema& schema, int max_len, bool with_tags);

/// Supervised agent. with_tags=false gives the no-tag baseline, true the tagged one.
TrainResult pretrain_agent(const std::vector<Session>& train, const std::vector<Session>& validation,
                           const Vocabulary& vocab, const SlotSchema& schema, const Config& config,
                           std::uint64_t seed, bool with_tags, const Logger& log = {});

/// Everything needed to simulate the user's answer to a candidate response.
struct Simulation {
  const Seq2SeqParams& user;
  const Vocabulary& vocab;
  const SlotSchema& schema;
  const Config& config;
  /// Only consulted when config.sim_turns > 1, to produce the follow-up agent turns.
  const Seq2SeqParams* agent = nullptr;
};

struct RewardSample {
  Tokens agent;
  Tokens user_reply;
  int indicator = 0;
  double reward = 0.0;
};

/// Picks the simulated user reply O among the user model's beam candidates.
Tokens select_user_reply(const std::vector<Hypothesis>& candidates, const Tokens& agent,
                         const SlotState& tags, const Simulation& sim);

/// I(A, O | tags) - baseline, O drawn from the user model. With sim_turns > 1
/// the exchange continues with the agent's greedy responses and the indicators
/// are summed.
RewardSample rl_reward(const Tokens& candidate, const AgentInput& input, const Simulation& sim);

/// Adds scale * reward * grad NLL(sample | input) into `grad`. This is the
/// gradient of -reward * log p(sample | input).
void accumulate_policy_gradient(const Seq2SeqParams& agent, std::span<const int> input,
                                std::span<const int> sample_ids, double reward, Seq2SeqParams& grad,
                                double scale = 1.0);

struct RlInput {
  AgentInput input;
  Ids ids;  // encoded with tags
};

std::vector<RlInput> make_rl_inputs(const std::vector<AgentExample>& examples, const Vocabulary& vocab,
                                    const SlotSchema& schema, int max_len);

struct RlStats {
  int samples = 0;
  int rewarded = 0;
  double reward_sum = 0.0;
  bool updated = false;
};

/// One REINFORCE update over `batch`: config.rl_samples sampled responses per
/// input, gradient averaged over all samples. A batch whose rewards are all zero
/// leaves `agent` untouched.
RlStats rl_step(Seq2SeqParams& agent, std::span<const RlInput> batch, const Simulation& sim,
                std::mt19937_64& rng, Seq2SeqParams& grad_buffer);

struct JointResult {
  Seq2SeqParams params;
  std::vector<double> validation_ppl;  // per epoch
  std::vector<double> mean_reward;     // per epoch, over RL samples (NaN when no RL ran)
  int rl_start_epoch = -1;
};

/// Alternates config.sl_steps supervised batches with config.rl_steps REINFORCE
/// batches. RL is held back until validation perplexity is within
/// config.fluency_gate times `reference_ppl`. sim.agent is ignored; follow-up
/// turns of a multi-turn reward use the policy being trained.
JointResult joint_train(Seq2SeqParams agent, const std::vector<Example>& sl_train,
                        const std::vector<Example>& sl_validation, const std::vector<RlInput>& rl_inputs,
                        const Simulation& sim, double reference_ppl, std::uint64_t seed,
                        const Logger& log = {});

struct ScoredCandidate {
  Hypothesis hypothesis;
  Tokens text;
  double score = 0.0;             // length-normalized log-probability
  std::optional<double> reward;   // set for the candidates sent to the user model
  Tokens user_reply;
};

struct RerankResult {
  std::vector<ScoredCandidate> candidates;  // beam order
  std::size_t chosen = 0;                   // index into candidates
  /// Candidates in final preference order: the scored top entries by
  /// (reward, score), then the rest in beam order.
  std::vector<std::size_t> ranking;

  const ScoredCandidate& response() const { return candidates.at(chosen); }
};

/// Beam search, simulate the top config.rerank_top candidates, and return the
/// highest-reward one (better model score on ties), or the beam top-1 when no
/// candidate earns a reward.
RerankResult rerank_infer(const Seq2SeqParams& agent, const Simulation& sim, const AgentInput& input);

/// Sets ranking and chosen from the rewards of the first `top` candidates.
void rank_by_reward(RerankResult& r, std::size_t top);

/// Beam candidates without reranking, in beam order.
std::vector<ScoredCandidate> beam_candidates(const Seq2SeqParams& agent, const Ids& input,
                                             const Vocabulary& vocab, int beam_width, int max_len);

}  // namespace samia
