#pragma once

#include <vector>

#include "samia/config.hpp"
#include "samia/corpus.hpp"
#include "samia/seq2seq.hpp"
#include "samia/text.hpp"
#include "samia/trainer.hpp"

namespace samia {

struct TextPair {
  Tokens input;
  Tokens target;
};

/// Every agent turn immediately followed by a user turn. The opening user turn
/// has no agent turn before it and yields nothing.
std::vector<TextPair> extract_user_pairs(const std::vector<Session>& sessions);

std::vector<Example> to_examples(const std::vector<TextPair>& pairs, const Vocabulary& vocab, int max_len);

ModelDims model_dims(const Vocabulary& vocab, const Config& config);
TrainOptions train_options(const Config& config, std::uint64_t seed);

TrainResult train_user(const std::vector<TextPair>& train, const std::vector<TextPair>& validation,
                       const Vocabulary& vocab, const Config& config, std::uint64_t seed,
                       const Logger& log = {});

/// User-reply candidates for one agent utterance, best first.
std::vector<Hypothesis> reply(const Seq2SeqParams& user, const Vocabulary& vocab,
                              const Tokens& agent_text, int beam_width, int max_len);

}  // namespace samia
