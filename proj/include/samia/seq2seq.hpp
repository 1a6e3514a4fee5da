#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace samia {

struct ModelDims {
  int vocab = 0;
  int emb = 32;
  int hidden = 64;
  int bos = 1;
  int eos = 2;

  bool operator==(const ModelDims&) const = default;
};

struct TensorView {
  std::string_view name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Map<Eigen::MatrixXd> map() const { return {data, rows, cols}; }
};

struct ConstTensorView {
  std::string_view name;
  const double* data;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Map<const Eigen::MatrixXd> map() const { return {data, rows, cols}; }
};

/// Bidirectional LSTM encoder, additive attention, LSTM decoder with a
/// softmax readout over [decoder state; context; previous-token embedding].
/// LSTM gate rows are ordered input, forget, output, candidate.
struct Seq2SeqParams {
  ModelDims dims;
  Eigen::MatrixXd embedding;     // V x D
  Eigen::MatrixXd enc_fwd_w;     // 4H x (D + H)
  Eigen::VectorXd enc_fwd_b;     // 4H
  Eigen::MatrixXd enc_bwd_w;     // 4H x (D + H)
  Eigen::VectorXd enc_bwd_b;     // 4H
  Eigen::MatrixXd init_w;        // H x H, applied to the final backward encoder state
  Eigen::VectorXd init_b;        // H
  Eigen::MatrixXd att_state_w;   // H x H
  Eigen::MatrixXd att_source_w;  // H x 2H
  Eigen::VectorXd att_b;         // H
  Eigen::VectorXd att_v;         // H
  Eigen::MatrixXd dec_w;         // 4H x (D + 2H + H), input [emb; context; prev state]
  Eigen::VectorXd dec_b;         // 4H
  Eigen::MatrixXd out_w;         // V x (H + 2H + D)
  Eigen::VectorXd out_b;         // V

  static Seq2SeqParams zeros(const ModelDims& dims);
  /// Uniform in [-scale, scale].
  static Seq2SeqParams random(const ModelDims& dims, std::uint64_t seed, double scale = 0.08);

  std::vector<TensorView> tensors();
  std::vector<ConstTensorView> tensors() const;

  void set_zero();
  void add_scaled(const Seq2SeqParams& other, double scale);
  void scale(double factor);
  double squared_norm() const;
  bool all_finite() const;
  std::size_t parameter_count() const;

  bool operator==(const Seq2SeqParams& o) const;
};

struct EncoderOutput {
  Eigen::MatrixXd states;       // 2H x T; column j is [forward_j; backward_j]
  Eigen::MatrixXd keys;         // H x T; att_source_w * states
  Eigen::VectorXd init_hidden;  // decoder state s_0
};

struct DecoderState {
  Eigen::VectorXd hidden;
  Eigen::VectorXd cell;
};

struct AttentionResult {
  Eigen::VectorXd context;  // 2H
  Eigen::VectorXd weights;  // T
};

struct Hypothesis {
  std::vector<int> ids;  // includes the trailing EOS when finished
  double log_prob = 0.0;
  bool finished = false;

  /// log_prob / token count (EOS counted); the beam ranking key.
  double normalized_score() const;
};

EncoderOutput encode_seq(const Seq2SeqParams& params, std::span<const int> input);

AttentionResult attention(const Seq2SeqParams& params, const Eigen::VectorXd& s_prev,
                          const EncoderOutput& enc);

DecoderState initial_state(const Seq2SeqParams& params, const EncoderOutput& enc);

struct StepResult {
  DecoderState state;
  Eigen::VectorXd probs;  // V
};

StepResult decode_step(const Seq2SeqParams& params, const DecoderState& prev, int y_prev,
                       const EncoderOutput& enc);

/// Teacher-forced -sum log p(target | input). When `grad` is non-null the
/// gradient, multiplied by `grad_scale`, is added into it.
double nll_loss(const Seq2SeqParams& params, std::span<const int> input,
                std::span<const int> target, Seq2SeqParams* grad = nullptr,
                double grad_scale = 1.0);

/// Ancestral sampling (argmax when `greedy`). Stops at EOS or max_len tokens.
Hypothesis sample(const Seq2SeqParams& params, std::span<const int> input, int max_len,
                  std::mt19937_64& rng, bool greedy = false);

/// Finished hypotheses, best length-normalized score first; ties go to the
/// lexicographically smaller id sequence.
std::vector<Hypothesis> beam_search(const Seq2SeqParams& params, std::span<const int> input,
                                    int beam_width, int max_len);

/// Clips the global gradient norm to `clip_norm`, then params -= step_size * grad.
/// Returns the norm of the applied gradient. Throws on a non-finite gradient.
double sgd_update(Seq2SeqParams& params, const Seq2SeqParams& grad, double step_size,
                  double clip_norm);

}  // namespace samia
