#include "samia/agent_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "samia/user_model.hpp"

namespace samia {

std::vector<AgentExample> extract_agent_examples(const std::vector<Session>& sessions) {
  std::vector<AgentExample> out;
  for (const auto& s : sessions) {
    for (std::size_t k = 1; k < s.turns.size(); ++k) {
      const auto& t = s.turns[k];
      if (t.role != Role::Agent || s.turns[k - 1].role != Role::User) continue;
      out.push_back({{t.tags_before, s.turns[k - 1].text}, t.text});
    }
  }
  return out;
}

Ids encode_agent_input(const AgentInput& input, const Vocabulary& vocab, const SlotSchema& schema,
                       int max_len, bool with_tags) {
  if (max_len < 2) throw std::invalid_argument("encode_agent_input: max_len must be >= 2");
  Ids ids;
  if (with_tags) {
    for (const auto& slot : schema.slots) {
      auto it = input.tags.find(slot.name);
      if (it == input.tags.end()) continue;
      ids.push_back(vocab.marker_id(slot.name));
      for (const auto& tok : split_tokens(it->second)) ids.push_back(vocab.id(tok));
    }
  }
  ids.push_back(Vocabulary::kSep);
  // room for the separator and EOS is reserved even with a huge tag segment
  const auto room = static_cast<std::ptrdiff_t>(max_len) - static_cast<std::ptrdiff_t>(ids.size()) - 1;
  const auto keep = std::clamp<std::ptrdiff_t>(room, 0, static_cast<std::ptrdiff_t>(input.user_text.size()));
  for (std::ptrdiff_t i = 0; i < keep; ++i) ids.push_back(vocab.id(input.user_text[static_cast<std::size_t>(i)]));
  ids.push_back(Vocabulary::kEos);
  return ids;
}

std::vector<Example> to_examples(const std::vector<AgentExample>& examples, const Vocabulary& vocab,
                                 const SlotSchema& schema, int max_len, bool with_tags) {
  std::vector<Example> out;
  out.reserve(examples.size());
  for (const auto& e : examples)
    out.push_back({encode_agent_input(e.input, vocab, schema, max_len, with_tags), encode(e.target, vocab, max_len)});
  return out;
}

TrainResult pretrain_agent(const std::vector<Session>& train, const std::vector<Session>& validation,
                           const Vocabulary& vocab, const SlotSchema& schema, const Config& config,
                           std::uint64_t seed, bool with_tags, const Logger& log) {
  auto init = Seq2SeqParams::random(model_dims(vocab, config), seed, config.init_scale);
  return train_supervised(std::move(init),
                          to_examples(extract_agent_examples(train), vocab, schema, config.max_len, with_tags),
                          to_examples(extract_agent_examples(validation), vocab, schema, config.max_len, with_tags),
                          train_options(config, seed), log);
}

namespace {

Tokens concat(const Tokens& a, const Tokens& b) {
  Tokens out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

Tokens select_user_reply(const std::vector<Hypothesis>& candidates, const Tokens& agent,
                         const SlotState& tags, const Simulation& sim) {
  if (candidates.empty()) return {};
  if (sim.config.user_reply_selection == ReplySelection::IndicatorBest) {
    for (const auto& h : candidates) {
      Tokens o = decode(h.ids, sim.vocab);
      if (indicator(agent, o, tags, sim.schema)) return o;
    }
  }
  return decode(candidates.front().ids, sim.vocab);
}

RewardSample rl_reward(const Tokens& candidate, const AgentInput& input, const Simulation& sim) {
  RewardSample out;
  out.agent = candidate;
  // No vacant slot means the indicator is zero whatever the user says.
  if (is_complete(input.tags, sim.schema)) {
    out.reward = -sim.config.reward_baseline;
    return out;
  }
  const int beam = sim.config.user_beam_width;
  const int max_len = sim.config.max_len;
  auto answer = [&](const Tokens& a, const SlotState& tags) {
    return select_user_reply(reply(sim.user, sim.vocab, a, beam, max_len), a, tags, sim);
  };

  out.user_reply = answer(candidate, input.tags);
  out.indicator = indicator(candidate, out.user_reply, input.tags, sim.schema);
  double total = out.indicator;

  if (sim.config.sim_turns > 1) {
    if (sim.agent == nullptr) throw std::invalid_argument("rl_reward: multi-turn simulation needs the agent");
    SlotState tags = merge(input.tags, extract_slots(concat(candidate, out.user_reply), sim.schema));
    Tokens user_text = out.user_reply;
    Tokens agent_text = candidate;
    std::mt19937_64 unused(0);
    for (int turn = 1; turn < sim.config.sim_turns; ++turn) {
      if (is_complete(tags, sim.schema) || is_confirmation(agent_text)) break;
      const Ids ids = encode_agent_input({tags, user_text}, sim.vocab, sim.schema, max_len, true);
      agent_text = decode(sample(*sim.agent, ids, max_len, unused, true).ids, sim.vocab);
      user_text = answer(agent_text, tags);
      total += indicator(agent_text, user_text, tags, sim.schema);
      tags = merge(tags, extract_slots(concat(agent_text, user_text), sim.schema));
    }
  }
  out.reward = total - sim.config.reward_baseline;
  return out;
}

void accumulate_policy_gradient(const Seq2SeqParams& agent, std::span<const int> input,
                                std::span<const int> sample_ids, double reward, Seq2SeqParams& grad,
                                double scale) {
  if (reward == 0.0 || sample_ids.empty()) return;
  nll_loss(agent, input, sample_ids, &grad, reward * scale);
}

std::vector<RlInput> make_rl_inputs(const std::vector<AgentExample>& examples, const Vocabulary& vocab,
                                    const SlotSchema& schema, int max_len) {
  std::vector<RlInput> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back({e.input, encode_agent_input(e.input, vocab, schema, max_len, true)});
  return out;
}

RlStats rl_step(Seq2SeqParams& agent, std::span<const RlInput> batch, const Simulation& sim,
                std::mt19937_64& rng, Seq2SeqParams& grad) {
  RlStats stats;
  if (batch.empty()) return stats;
  grad.set_zero();
  const int n = sim.config.rl_samples;
  const double scale = 1.0 / static_cast<double>(batch.size() * static_cast<std::size_t>(n));
  for (const auto& item : batch) {
    for (int k = 0; k < n; ++k) {
      const Hypothesis h = sample(agent, item.ids, sim.config.max_len, rng);
      const RewardSample r = rl_reward(decode(h.ids, sim.vocab), item.input, sim);
      ++stats.samples;
      stats.reward_sum += r.reward;
      if (r.reward != 0.0) {
        ++stats.rewarded;
        accumulate_policy_gradient(agent, item.ids, h.ids, r.reward, grad, scale);
      }
    }
  }
  if (stats.rewarded > 0) {
    if (!grad.all_finite()) throw std::runtime_error("reinforcement step diverged: non-finite gradient");
    sgd_update(agent, grad, sim.config.rl_learning_rate, sim.config.clip_norm);
    stats.updated = true;
  }
  return stats;
}

JointResult joint_train(Seq2SeqParams agent, const std::vector<Example>& sl_train,
                        const std::vector<Example>& sl_validation, const std::vector<RlInput>& rl_inputs,
                        const Simulation& outer, double reference_ppl, std::uint64_t seed, const Logger& log) {
  const Config& cfg = outer.config;
  // follow-up turns of a multi-turn reward come from the policy being trained
  const Simulation sim{outer.user, outer.vocab, outer.schema, outer.config, &agent};
  if (cfg.sl_steps > 0 && sl_train.empty()) throw std::invalid_argument("joint_train: empty supervised set");
  if (cfg.rl_steps > 0 && rl_inputs.empty()) throw std::invalid_argument("joint_train: empty RL input set");

  JointResult result;
  Seq2SeqParams grad = Seq2SeqParams::zeros(agent.dims);
  std::mt19937_64 rng(seed);
  const auto sl_batch = static_cast<std::size_t>(cfg.batch_size);
  const auto rl_batch = static_cast<std::size_t>(cfg.rl_batch_size);
  std::vector<Example> sl_buf;
  std::vector<RlInput> rl_buf;
  std::size_t sl_pos = 0, rl_pos = 0;
  std::vector<std::size_t> sl_order, rl_order;
  int sl_pass = 0, rl_pass = 0;

  auto next_sl = [&] {
    sl_buf.clear();
    for (std::size_t k = 0; k < sl_batch; ++k) {
      if (sl_pos == sl_order.size()) {
        sl_order = epoch_order(sl_train.size(), seed, sl_pass++);
        sl_pos = 0;
      }
      sl_buf.push_back(sl_train[sl_order[sl_pos++]]);
    }
  };
  auto next_rl = [&] {
    rl_buf.clear();
    for (std::size_t k = 0; k < rl_batch; ++k) {
      if (rl_pos == rl_order.size()) {
        rl_order = epoch_order(rl_inputs.size(), seed ^ 0x5bd1e995ULL, rl_pass++);
        rl_pos = 0;
      }
      rl_buf.push_back(rl_inputs[rl_order[rl_pos++]]);
    }
  };

  const double gate = cfg.fluency_gate * reference_ppl;
  bool rl_open = cfg.rl_steps > 0 && corpus_perplexity(agent, sl_validation) <= gate;
  if (rl_open) result.rl_start_epoch = 0;

  for (int epoch = 0; epoch < cfg.joint_epochs; ++epoch) {
    // An epoch is one pass over the RL inputs once RL runs, else over the SL data.
    std::size_t rounds;
    if (rl_open)
      rounds = (rl_inputs.size() + rl_batch * static_cast<std::size_t>(cfg.rl_steps) - 1) /
               (rl_batch * static_cast<std::size_t>(cfg.rl_steps));
    else if (cfg.sl_steps > 0)
      rounds = (sl_train.size() + sl_batch * static_cast<std::size_t>(cfg.sl_steps) - 1) /
               (sl_batch * static_cast<std::size_t>(cfg.sl_steps));
    else
      rounds = 0;

    double reward_sum = 0.0;
    int samples = 0;
    for (std::size_t round = 0; round < rounds; ++round) {
      for (int k = 0; k < cfg.sl_steps; ++k) {
        next_sl();
        std::size_t tokens = 0;
        sgd_batch_step(agent, sl_buf, cfg.learning_rate, cfg.clip_norm, grad, tokens);
      }
      if (!rl_open) continue;
      for (int k = 0; k < cfg.rl_steps; ++k) {
        next_rl();
        const RlStats st = rl_step(agent, rl_buf, sim, rng, grad);
        reward_sum += st.reward_sum;
        samples += st.samples;
      }
    }

    const double val_ppl = corpus_perplexity(agent, sl_validation);
    if (!std::isfinite(val_ppl)) throw std::runtime_error("joint training diverged: non-finite validation perplexity");
    result.validation_ppl.push_back(val_ppl);
    const double mean = samples > 0 ? reward_sum / samples : std::numeric_limits<double>::quiet_NaN();
    result.mean_reward.push_back(mean);
    if (log) {
      std::ostringstream msg;
      msg << "joint epoch " << epoch + 1 << ": validation ppl " << val_ppl;
      if (samples > 0) msg << ", mean sampled reward " << mean;
      else msg << ", rl idle";
      log(msg.str());
    }
    if (!rl_open && cfg.rl_steps > 0 && val_ppl <= gate) {
      rl_open = true;
      result.rl_start_epoch = epoch + 1;
    }
  }
  result.params = std::move(agent);
  return result;
}

std::vector<ScoredCandidate> beam_candidates(const Seq2SeqParams& agent, const Ids& input,
                                             const Vocabulary& vocab, int beam_width, int max_len) {
  std::vector<ScoredCandidate> out;
  for (auto& h : beam_search(agent, input, beam_width, max_len)) {
    ScoredCandidate c;
    c.text = decode(h.ids, vocab);
    c.score = h.normalized_score();
    c.hypothesis = std::move(h);
    out.push_back(std::move(c));
  }
  return out;
}

RerankResult rerank_infer(const Seq2SeqParams& agent, const Simulation& sim, const AgentInput& input) {
  const Config& cfg = sim.config;
  RerankResult r;
  const Ids ids = encode_agent_input(input, sim.vocab, sim.schema, cfg.max_len, true);
  r.candidates = beam_candidates(agent, ids, sim.vocab, cfg.beam_width, cfg.max_len);
  if (r.candidates.empty()) throw std::runtime_error("rerank_infer: beam search returned no candidates");

  const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(cfg.rerank_top), r.candidates.size());
  for (std::size_t k = 0; k < top; ++k) {
    const RewardSample s = rl_reward(r.candidates[k].text, input, sim);
    r.candidates[k].reward = s.reward;
    r.candidates[k].user_reply = s.user_reply;
  }
  rank_by_reward(r, top);
  return r;
}

void rank_by_reward(RerankResult& r, std::size_t top) {
  top = std::min(top, r.candidates.size());
  if (top == 0) throw std::invalid_argument("rank_by_reward: no candidates");
  for (std::size_t k = 0; k < top; ++k)
    if (!r.candidates[k].reward) throw std::invalid_argument("rank_by_reward: unscored candidate in the top entries");
  r.ranking.resize(r.candidates.size());
  std::iota(r.ranking.begin(), r.ranking.end(), 0);
  std::stable_sort(r.ranking.begin(), r.ranking.begin() + static_cast<std::ptrdiff_t>(top),
                   [&](std::size_t a, std::size_t b) {
                     const double ra = *r.candidates[a].reward, rb = *r.candidates[b].reward;
                     if (ra != rb) return ra > rb;
                     return r.candidates[a].score > r.candidates[b].score;
                   });
  const double best = *r.candidates[r.ranking.front()].reward;
  r.chosen = best > 0.0 ? r.ranking.front() : 0;
  if (best <= 0.0) {
    // no reward anywhere: the beam order stands
    std::iota(r.ranking.begin(), r.ranking.begin() + static_cast<std::ptrdiff_t>(top), 0);
  }
}

}  // namespace samia
