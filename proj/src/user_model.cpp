#include "samia/user_model.hpp"

namespace samia {

std::vector<TextPair> extract_user_pairs(const std::vector<Session>& sessions) {
  std::vector<TextPair> pairs;
  for (const auto& s : sessions) {
    for (std::size_t k = 0; k + 1 < s.turns.size(); ++k) {
      if (s.turns[k].role == Role::Agent && s.turns[k + 1].role == Role::User)
        pairs.push_back({s.turns[k].text, s.turns[k + 1].text});
    }
  }
  return pairs;
}

std::vector<Example> to_examples(const std::vector<TextPair>& pairs, const Vocabulary& vocab, int max_len) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({encode(p.input, vocab, max_len), encode(p.target, vocab, max_len)});
  return out;
}

ModelDims model_dims(const Vocabulary& vocab, const Config& config) {
  ModelDims d;
  d.vocab = vocab.size();
  d.emb = config.d_emb;
  d.hidden = config.d_hidden;
  d.bos = Vocabulary::kBos;
  d.eos = Vocabulary::kEos;
  return d;
}

TrainOptions train_options(const Config& config, std::uint64_t seed) {
  TrainOptions o;
  o.learning_rate = config.learning_rate;
  o.lr_decay = config.lr_decay;
  o.clip_norm = config.clip_norm;
  o.batch_size = config.batch_size;
  o.max_epochs = config.max_epochs;
  o.patience = config.patience;
  o.seed = seed;
  return o;
}

TrainResult train_user(const std::vector<TextPair>& train, const std::vector<TextPair>& validation,
                       const Vocabulary& vocab, const Config& config, std::uint64_t seed,
                       const Logger& log) {
  auto init = Seq2SeqParams::random(model_dims(vocab, config), seed, config.init_scale);
  return train_supervised(std::move(init), to_examples(train, vocab, config.max_len),
                          to_examples(validation, vocab, config.max_len), train_options(config, seed), log);
}

std::vector<Hypothesis> reply(const Seq2SeqParams& user, const Vocabulary& vocab,
                              const Tokens& agent_text, int beam_width, int max_len) {
  return beam_search(user, encode(agent_text, vocab, max_len), beam_width, max_len);
}

}  // namespace samia
