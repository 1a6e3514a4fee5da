#include "samia/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace samia {

double corpus_perplexity(const Seq2SeqParams& params, std::span<const Example> examples) {
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : examples) {
    nll += nll_loss(params, ex.input, ex.target);
    tokens += ex.target.size();
  }
  if (tokens == 0) throw std::invalid_argument("corpus_perplexity: no target tokens");
  return std::exp(nll / static_cast<double>(tokens));
}

double sgd_batch_step(Seq2SeqParams& params, std::span<const Example> batch, double learning_rate,
                      double clip_norm, Seq2SeqParams& grad, std::size_t& tokens) {
  grad.set_zero();
  double loss = 0.0;
  for (const auto& ex : batch) {
    loss += nll_loss(params, ex.input, ex.target, &grad);
    tokens += ex.target.size();
  }
  if (!std::isfinite(loss)) throw std::runtime_error("training diverged: non-finite loss");
  grad.scale(1.0 / static_cast<double>(batch.size()));
  sgd_update(params, grad, learning_rate, clip_norm);
  return loss;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

TrainResult train_supervised(Seq2SeqParams params, const std::vector<Example>& train,
                             const std::vector<Example>& validation, const TrainOptions& opt,
                             const Logger& log) {
  if (train.empty()) throw std::invalid_argument("train_supervised: empty training set");
  if (validation.empty()) throw std::invalid_argument("train_supervised: empty validation set");

  TrainResult result;
  result.params = params;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  double lr = opt.learning_rate;
  Seq2SeqParams grad = Seq2SeqParams::zeros(params.dims);
  std::vector<Example> batch;

  for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
    const auto order = epoch_order(train.size(), opt.seed, epoch);
    double loss = 0.0;
    std::size_t tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      for (std::size_t k = start; k < end; ++k) batch.push_back(train[order[k]]);
      loss += sgd_batch_step(params, batch, lr, opt.clip_norm, grad, tokens);
    }
    const double train_ppl = std::exp(loss / static_cast<double>(tokens));
    const double val_ppl = corpus_perplexity(params, validation);
    if (!std::isfinite(val_ppl)) throw std::runtime_error("training diverged: non-finite validation perplexity");
    result.train_ppl.push_back(train_ppl);
    result.validation_ppl.push_back(val_ppl);
    if (log) {
      std::ostringstream msg;
      msg << "epoch " << epoch + 1 << ": train ppl " << train_ppl << ", validation ppl " << val_ppl;
      log(msg.str());
    }
    if (val_ppl < best) {
      best = val_ppl;
      result.params = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    } else {
      lr *= opt.lr_decay;
    }
  }
  return result;
}

}  // namespace samia
