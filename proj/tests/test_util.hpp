#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "samia/seq2seq.hpp"
#include "samia/slots.hpp"

namespace samia::test {

inline std::vector<int> random_ids(std::mt19937_64& rng, int vocab, int len) {
  std::uniform_int_distribution<int> d(0, vocab - 1);
  std::vector<int> out;
  for (int i = 0; i < len; ++i) out.push_back(d(rng));
  return out;
}

/// Per-tensor relative error ||analytic - numeric|| / (||analytic|| + ||numeric||)
/// with central differences over every coordinate.
inline std::map<std::string, double> max_gradient_error(const Seq2SeqParams& params,
                                                        const std::vector<int>& input,
                                                        const std::vector<int>& target) {
  auto grad = Seq2SeqParams::zeros(params.dims);
  nll_loss(params, input, target, &grad);
  auto p = params;
  auto views = p.tensors();
  const auto gviews = std::as_const(grad).tensors();
  std::map<std::string, double> out;
  const double h = 1e-5;
  for (std::size_t t = 0; t < views.size(); ++t) {
    const auto n = views[t].rows * views[t].cols;
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      double& x = views[t].data[k];
      const double saved = x;
      x = saved + h;
      const double lp = nll_loss(p, input, target);
      x = saved - h;
      const double lm = nll_loss(p, input, target);
      x = saved;
      const double num = (lp - lm) / (2 * h);
      const double ana = gviews[t].data[k];
      diff2 += (num - ana) * (num - ana);
      a2 += ana * ana;
      n2 += num * num;
    }
    const double denom = std::sqrt(a2) + std::sqrt(n2);
    out[std::string(views[t].name)] = denom == 0.0 ? 0.0 : std::sqrt(diff2) / denom;
  }
  return out;
}

/// Best finished sequence of at most max_len tokens by length-normalized
/// log-probability, found by enumerating every sequence.
inline Hypothesis exhaustive_best(const Seq2SeqParams& p, const std::vector<int>& input, int max_len) {
  const auto enc = encode_seq(p, input);
  Hypothesis best;
  bool have = false;
  std::function<void(const DecoderState&, int, Hypothesis)> walk = [&](const DecoderState& st, int prev,
                                                                       Hypothesis h) {
    const auto r = decode_step(p, st, prev, enc);
    for (int w = 0; w < p.dims.vocab; ++w) {
      Hypothesis e = h;
      e.ids.push_back(w);
      e.log_prob += std::log(r.probs[w]);
      if (w == p.dims.eos) {
        e.finished = true;
        const double s = e.normalized_score();
        const double b = have ? best.normalized_score() : 0.0;
        if (!have || s > b || (s == b && e.ids < best.ids)) {
          best = e;
          have = true;
        }
      } else if (static_cast<int>(e.ids.size()) < max_len) {
        walk(r.state, w, e);
      }
    }
  };
  walk(initial_state(p, enc), p.dims.bos, Hypothesis{});
  return best;
}

// Independent presence test: a lexicon value occurs as a contiguous run, or a
// <num> is followed by an address keyword inside one sentence.
inline std::set<std::string> present_slots(const Tokens& text, const SlotSchema& schema) {
  std::set<std::string> out;
  for (const auto& slot : schema.slots) {
    if (slot.kind == SlotKind::Lexicon) {
      for (const auto& v : slot.values) {
        const Tokens w = split_tokens(v);
        for (std::size_t i = 0; i + w.size() <= text.size(); ++i) {
          bool eq = true;
          for (std::size_t k = 0; k < w.size(); ++k) eq = eq && text[i + k] == w[k];
          if (eq) out.insert(slot.name);
        }
      }
    } else {
      for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != "<num>") continue;
        for (std::size_t j = i + 1; j < text.size(); ++j) {
          if (text[j] == "." || text[j] == "?" || text[j] == "!") break;
          for (const auto& kw : slot.values)
            if (text[j] == kw) out.insert(slot.name);
        }
      }
    }
  }
  return out;
}

}  // namespace samia::test
