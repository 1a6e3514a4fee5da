#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "samia/corpus.hpp"

namespace samia {

enum class ReplySelection { IndicatorBest, Top1 };
/// What nDCG divides by: the DCG of an all-rewarded list, or of the item's own
/// candidates sorted by gain.
enum class NdcgIdeal { MaxReward, Candidates };

/// Every tunable of the pipeline. Loaded from a `key = value` text file.
struct Config {
  int config_version = 1;
  std::uint64_t seed = 1;

  // corpus
  int n_sessions = 2000;
  double train_ratio = 0.8;
  double validation_ratio = 0.1;
  double test_ratio = 0.1;
  GeneratorOptions generator;
  int min_freq = 2;

  // network (reference system: hidden 1024, embedding 256, max length 50)
  int d_hidden = 64;
  int d_emb = 32;
  int max_len = 30;
  double init_scale = 0.08;

  // supervised training
  double learning_rate = 0.5;
  double clip_norm = 5.0;
  double lr_decay = 0.5;
  int batch_size = 16;
  int max_epochs = 12;
  int patience = 3;

  // simulation and reinforcement learning
  int beam_width = 20;       // agent candidates at test time
  int rerank_top = 5;        // candidates fed to the user model
  int user_beam_width = 20;  // user-model candidates per simulated reply
  double reward_baseline = 0.0;
  ReplySelection user_reply_selection = ReplySelection::IndicatorBest;
  int rl_samples = 1;        // sampled responses per input
  int sim_turns = 1;         // simulated exchanges per reward
  int sl_steps = 1;          // SL:RL update ratio during joint training
  int rl_steps = 1;
  double fluency_gate = 1.5; // RL starts once val ppl <= fluency_gate * pretrain best
  double rl_learning_rate = 0.5;
  int rl_batch_size = 16;
  int joint_epochs = 4;

  // evaluation
  int eval_repeats = 5;
  bool eval_retrain = false;
  NdcgIdeal ndcg_ideal = NdcgIdeal::MaxReward;

  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);

/// Sets one key from its textual value; throws ConfigError on unknown keys.
void set_config_value(Config& config, const std::string& key, const std::string& value);

/// Round-trippable text form, with the reference-system values noted in comments.
std::string to_text(const Config& config);

}  // namespace samia
