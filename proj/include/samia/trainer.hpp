#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "samia/seq2seq.hpp"
#include "samia/text.hpp"

namespace samia {

struct Example {
  Ids input;
  Ids target;  // EOS-terminated
};

using Logger = std::function<void(const std::string&)>;

struct TrainOptions {
  double learning_rate = 0.5;
  double clip_norm = 5.0;
  int batch_size = 16;
  int max_epochs = 12;
  int patience = 3;
  double lr_decay = 1.0;  // learning rate factor after an epoch without validation improvement
  std::uint64_t seed = 1;
};

struct TrainResult {
  Seq2SeqParams params;              // best-validation checkpoint
  std::vector<double> train_ppl;     // per epoch, measured during the epoch
  std::vector<double> validation_ppl;
  int best_epoch = -1;
};

/// exp(total NLL / total target tokens).
double corpus_perplexity(const Seq2SeqParams& params, std::span<const Example> examples);

/// One averaged-gradient SGD step on `batch`. Returns the summed NLL and adds
/// the target token count to `tokens`. Throws on divergence.
double sgd_batch_step(Seq2SeqParams& params, std::span<const Example> batch, double learning_rate,
                      double clip_norm, Seq2SeqParams& grad_buffer, std::size_t& tokens);

/// Minibatch SGD with early stopping on validation perplexity.
TrainResult train_supervised(Seq2SeqParams init, const std::vector<Example>& train,
                             const std::vector<Example>& validation, const TrainOptions& options,
                             const Logger& log = {});

/// Deterministic epoch order.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

}  // namespace samia
