#include "samia/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace samia {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Parameters

Seq2SeqParams Seq2SeqParams::zeros(const ModelDims& d) {
  if (d.vocab < 1 || d.emb < 1 || d.hidden < 1)
    throw std::invalid_argument("ModelDims: sizes must be positive");
  if (d.bos < 0 || d.bos >= d.vocab || d.eos < 0 || d.eos >= d.vocab)
    throw std::invalid_argument("ModelDims: bos/eos outside vocabulary");
  const Index V = d.vocab, D = d.emb, H = d.hidden;
  Seq2SeqParams p;
  p.dims = d;
  p.embedding = MatrixXd::Zero(V, D);
  p.enc_fwd_w = MatrixXd::Zero(4 * H, D + H);
  p.enc_fwd_b = VectorXd::Zero(4 * H);
  p.enc_bwd_w = MatrixXd::Zero(4 * H, D + H);
  p.enc_bwd_b = VectorXd::Zero(4 * H);
  p.init_w = MatrixXd::Zero(H, H);
  p.init_b = VectorXd::Zero(H);
  p.att_state_w = MatrixXd::Zero(H, H);
  p.att_source_w = MatrixXd::Zero(H, 2 * H);
  p.att_b = VectorXd::Zero(H);
  p.att_v = VectorXd::Zero(H);
  p.dec_w = MatrixXd::Zero(4 * H, D + 3 * H);
  p.dec_b = VectorXd::Zero(4 * H);
  p.out_w = MatrixXd::Zero(V, 3 * H + D);
  p.out_b = VectorXd::Zero(V);
  return p;
}

Seq2SeqParams Seq2SeqParams::random(const ModelDims& d, std::uint64_t seed, double scale) {
  Seq2SeqParams p = zeros(d);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& t : p.tensors())
    for (Index k = 0; k < t.rows * t.cols; ++k) t.data[k] = u(rng);
  return p;
}

namespace {
template <class P, class View>
std::vector<View> tensor_list(P& p) {
  auto v = [](std::string_view name, auto& m) {
    return View{name, m.data(), m.rows(), m.cols()};
  };
  return {v("embedding", p.embedding),       v("enc_fwd.w", p.enc_fwd_w),
          v("enc_fwd.b", p.enc_fwd_b),       v("enc_bwd.w", p.enc_bwd_w),
          v("enc_bwd.b", p.enc_bwd_b),       v("init.w", p.init_w),
          v("init.b", p.init_b),             v("att.state_w", p.att_state_w),
          v("att.source_w", p.att_source_w), v("att.b", p.att_b),
          v("att.v", p.att_v),               v("dec.w", p.dec_w),
          v("dec.b", p.dec_b),               v("out.w", p.out_w),
          v("out.b", p.out_b)};
}
}  // namespace

std::vector<TensorView> Seq2SeqParams::tensors() {
  return tensor_list<Seq2SeqParams, TensorView>(*this);
}
std::vector<ConstTensorView> Seq2SeqParams::tensors() const {
  return tensor_list<const Seq2SeqParams, ConstTensorView>(*this);
}

void Seq2SeqParams::set_zero() {
  for (auto& t : tensors()) t.map().setZero();
}

void Seq2SeqParams::add_scaled(const Seq2SeqParams& other, double s) {
  auto mine = tensors();
  auto theirs = other.tensors();
  if (mine.size() != theirs.size()) throw std::invalid_argument("add_scaled: shape mismatch");
  for (std::size_t k = 0; k < mine.size(); ++k) {
    if (mine[k].rows != theirs[k].rows || mine[k].cols != theirs[k].cols)
      throw std::invalid_argument("add_scaled: shape mismatch in " + std::string(mine[k].name));
    mine[k].map() += s * theirs[k].map();
  }
}

void Seq2SeqParams::scale(double factor) {
  for (auto& t : tensors()) t.map() *= factor;
}

double Seq2SeqParams::squared_norm() const {
  double s = 0.0;
  for (const auto& t : tensors()) s += t.map().squaredNorm();
  return s;
}

bool Seq2SeqParams::all_finite() const {
  for (const auto& t : tensors())
    if (!t.map().allFinite()) return false;
  return true;
}

std::size_t Seq2SeqParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += static_cast<std::size_t>(t.rows * t.cols);
  return n;
}

bool Seq2SeqParams::operator==(const Seq2SeqParams& o) const {
  if (!(dims == o.dims)) return false;
  auto a = tensors();
  auto b = o.tensors();
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].rows != b[k].rows || a[k].cols != b[k].cols) return false;
    if (!std::equal(a[k].data, a[k].data + a[k].rows * a[k].cols, b[k].data)) return false;
  }
  return true;
}

double Hypothesis::normalized_score() const {
  return ids.empty() ? log_prob : log_prob / static_cast<double>(ids.size());
}

// ---------------------------------------------------------------------------
// Building blocks

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// z (4H) -> activated gates in place; returns new cell and hidden.
inline void lstm_activate(Eigen::Ref<VectorXd> z, const Eigen::Ref<const VectorXd>& c_prev,
                          Eigen::Ref<VectorXd> c, Eigen::Ref<VectorXd> h) {
  const Index H = c.size();
  for (Index k = 0; k < 3 * H; ++k) z[k] = sigmoid(z[k]);
  z.tail(H) = z.tail(H).array().tanh();
  c = z.segment(H, H).cwiseProduct(c_prev) + z.head(H).cwiseProduct(z.tail(H));
  h = z.segment(2 * H, H).cwiseProduct(c.array().tanh().matrix());
}

// Backward through one LSTM cell. `gates` are post-activation.
inline void lstm_backward(const Eigen::Ref<const VectorXd>& gates,
                          const Eigen::Ref<const VectorXd>& c_prev,
                          const Eigen::Ref<const VectorXd>& c, const VectorXd& dh,
                          const VectorXd& dc, Eigen::Ref<VectorXd> dz, VectorXd& dc_prev) {
  const Index H = c.size();
  const auto i = gates.head(H).array();
  const auto f = gates.segment(H, H).array();
  const auto o = gates.segment(2 * H, H).array();
  const auto g = gates.tail(H).array();
  const Eigen::ArrayXd tc = c.array().tanh();
  const Eigen::ArrayXd dct = dc.array() + dh.array() * o * (1.0 - tc * tc);
  dz.head(H) = (dct * g * i * (1.0 - i)).matrix();
  dz.segment(H, H) = (dct * c_prev.array() * f * (1.0 - f)).matrix();
  dz.segment(2 * H, H) = (dh.array() * tc * o * (1.0 - o)).matrix();
  dz.tail(H) = (dct * i * (1.0 - g * g)).matrix();
  dc_prev = (dct * f).matrix();
}

inline void softmax_inplace(Eigen::Ref<VectorXd> x) {
  const double m = x.maxCoeff();
  x = (x.array() - m).exp();
  x /= x.sum();
}

inline void log_softmax_inplace(Eigen::Ref<VectorXd> x) {
  const double m = x.maxCoeff();
  const double lse = m + std::log((x.array() - m).exp().sum());
  x.array() -= lse;
}

void check_ids(const Seq2SeqParams& p, std::span<const int> ids) {
  for (int id : ids)
    if (id < 0 || id >= p.dims.vocab)
      throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                              std::to_string(p.dims.vocab));
}

// Cached encoder pass, one direction.
struct DirectionCache {
  MatrixXd gates;  // 4H x T
  MatrixXd cell;   // H x T
  MatrixXd hid;    // H x T
};

// reverse = false runs j = 0..T-1, true runs T-1..0. Position j's "previous"
// column is j-1 (forward) or j+1 (backward).
void run_direction(const MatrixXd& w, const VectorXd& b, const MatrixXd& x, bool reverse,
                   DirectionCache& cache) {
  const Index D = x.rows(), T = x.cols(), H = w.rows() / 4;
  cache.gates.noalias() = w.leftCols(D) * x;
  cache.gates.colwise() += b;
  cache.cell.resize(H, T);
  cache.hid.resize(H, T);
  const VectorXd zero = VectorXd::Zero(H);
  for (Index s = 0; s < T; ++s) {
    const Index j = reverse ? T - 1 - s : s;
    const Index prev = reverse ? j + 1 : j - 1;
    const bool has_prev = s > 0;
    if (has_prev) cache.gates.col(j).noalias() += w.rightCols(H) * cache.hid.col(prev);
    lstm_activate(cache.gates.col(j), has_prev ? VectorXd(cache.cell.col(prev)) : zero,
                  cache.cell.col(j), cache.hid.col(j));
  }
}

MatrixXd embed(const Seq2SeqParams& p, std::span<const int> ids) {
  MatrixXd x(p.dims.emb, static_cast<Index>(ids.size()));
  for (std::size_t k = 0; k < ids.size(); ++k) x.col(static_cast<Index>(k)) = p.embedding.row(ids[k]).transpose();
  return x;
}

struct EncoderCache {
  MatrixXd x;
  DirectionCache fwd, bwd;
};

EncoderOutput encode_cached(const Seq2SeqParams& p, std::span<const int> input, EncoderCache& cache) {
  if (input.empty()) throw std::invalid_argument("encode_seq: empty input");
  check_ids(p, input);
  const Index H = p.dims.hidden;
  cache.x = embed(p, input);
  run_direction(p.enc_fwd_w, p.enc_fwd_b, cache.x, false, cache.fwd);
  run_direction(p.enc_bwd_w, p.enc_bwd_b, cache.x, true, cache.bwd);
  EncoderOutput out;
  out.states.resize(2 * H, cache.x.cols());
  out.states.topRows(H) = cache.fwd.hid;
  out.states.bottomRows(H) = cache.bwd.hid;
  out.keys.noalias() = p.att_source_w * out.states;
  out.init_hidden.noalias() = p.init_w * cache.bwd.hid.col(0);
  out.init_hidden += p.init_b;
  return out;
}

// Scores over source positions for one decoder state. `tanh_u` receives the
// H x T pre-score activations, `weights` the softmax.
void attend(const Seq2SeqParams& p, const Eigen::Ref<const VectorXd>& s_prev, const EncoderOutput& enc,
            MatrixXd& tanh_u, Eigen::Ref<VectorXd> weights, Eigen::Ref<VectorXd> context) {
  VectorXd q = p.att_b;
  q.noalias() += p.att_state_w * s_prev;
  tanh_u = (enc.keys.colwise() + q).array().tanh();
  weights.noalias() = tanh_u.transpose() * p.att_v;
  softmax_inplace(weights);
  context.noalias() = enc.states * weights;
}

// Batched decoder step over B states sharing one encoding. Fills next states
// and log-probabilities (V x B).
void step_batch(const Seq2SeqParams& p, const MatrixXd& s_prev, const MatrixXd& c_prev,
                const std::vector<int>& y_prev, const EncoderOutput& enc, MatrixXd& s_next,
                MatrixXd& c_next, MatrixXd& logp) {
  const Index B = s_prev.cols(), H = p.dims.hidden, D = p.dims.emb, T = enc.states.cols();
  MatrixXd ctx(2 * H, B);
  MatrixXd emb(D, B);
  MatrixXd tanh_u(H, T);
  VectorXd w(T);
  for (Index b = 0; b < B; ++b) {
    attend(p, s_prev.col(b), enc, tanh_u, w, ctx.col(b));
    emb.col(b) = p.embedding.row(y_prev[static_cast<std::size_t>(b)]).transpose();
  }
  MatrixXd z = p.dec_w.leftCols(D) * emb;
  z.noalias() += p.dec_w.middleCols(D, 2 * H) * ctx;
  z.noalias() += p.dec_w.rightCols(H) * s_prev;
  z.colwise() += p.dec_b;
  s_next.resize(H, B);
  c_next.resize(H, B);
  for (Index b = 0; b < B; ++b) lstm_activate(z.col(b), c_prev.col(b), c_next.col(b), s_next.col(b));
  MatrixXd q(3 * H + D, B);
  q.topRows(H) = s_next;
  q.middleRows(H, 2 * H) = ctx;
  q.bottomRows(D) = emb;
  logp.noalias() = p.out_w * q;
  logp.colwise() += p.out_b;
  for (Index b = 0; b < B; ++b) log_softmax_inplace(logp.col(b));
}

}  // namespace

// ---------------------------------------------------------------------------
// Inference

EncoderOutput encode_seq(const Seq2SeqParams& params, std::span<const int> input) {
  EncoderCache cache;
  return encode_cached(params, input, cache);
}

AttentionResult attention(const Seq2SeqParams& params, const VectorXd& s_prev, const EncoderOutput& enc) {
  AttentionResult r;
  r.weights.resize(enc.states.cols());
  r.context.resize(enc.states.rows());
  MatrixXd tanh_u;
  attend(params, s_prev, enc, tanh_u, r.weights, r.context);
  return r;
}

DecoderState initial_state(const Seq2SeqParams& params, const EncoderOutput& enc) {
  return {enc.init_hidden, VectorXd::Zero(params.dims.hidden)};
}

StepResult decode_step(const Seq2SeqParams& params, const DecoderState& prev, int y_prev,
                       const EncoderOutput& enc) {
  check_ids(params, std::span<const int>(&y_prev, 1));
  MatrixXd s_next, c_next, logp;
  step_batch(params, prev.hidden, prev.cell, {y_prev}, enc, s_next, c_next, logp);
  StepResult r;
  r.state.hidden = s_next.col(0);
  r.state.cell = c_next.col(0);
  r.probs = logp.col(0).array().exp();
  return r;
}

Hypothesis sample(const Seq2SeqParams& params, std::span<const int> input, int max_len,
                  std::mt19937_64& rng, bool greedy) {
  const EncoderOutput enc = encode_seq(params, input);
  MatrixXd s = enc.init_hidden;
  MatrixXd c = MatrixXd::Zero(params.dims.hidden, 1);
  MatrixXd s_next, c_next, logp;
  Hypothesis h;
  int y = params.dims.bos;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int t = 0; t < max_len; ++t) {
    step_batch(params, s, c, {y}, enc, s_next, c_next, logp);
    int choice = 0;
    if (greedy) {
      logp.col(0).maxCoeff(&choice);
    } else {
      const double u = unif(rng);
      double acc = 0.0;
      choice = params.dims.vocab - 1;
      for (int k = 0; k < params.dims.vocab; ++k) {
        acc += std::exp(logp(k, 0));
        if (u < acc) {
          choice = k;
          break;
        }
      }
    }
    h.ids.push_back(choice);
    h.log_prob += logp(choice, 0);
    if (choice == params.dims.eos) {
      h.finished = true;
      break;
    }
    y = choice;
    s.swap(s_next);
    c.swap(c_next);
  }
  return h;
}

namespace {
bool better(const Hypothesis& a, double sa, const Hypothesis& b, double sb) {
  if (sa != sb) return sa > sb;
  return std::lexicographical_compare(a.ids.begin(), a.ids.end(), b.ids.begin(), b.ids.end());
}
}  // namespace

std::vector<Hypothesis> beam_search(const Seq2SeqParams& params, std::span<const int> input,
                                    int beam_width, int max_len) {
  if (beam_width < 1) throw std::invalid_argument("beam_search: beam_width must be >= 1");
  if (max_len < 1) throw std::invalid_argument("beam_search: max_len must be >= 1");
  const EncoderOutput enc = encode_seq(params, input);
  const int V = params.dims.vocab, eos = params.dims.eos;

  std::vector<Hypothesis> live(1);
  MatrixXd s = enc.init_hidden;
  MatrixXd c = MatrixXd::Zero(params.dims.hidden, 1);
  std::vector<Hypothesis> finished;

  struct Cand {
    int beam;
    int token;
    double score;
  };
  std::vector<Cand> cands;
  MatrixXd s_next, c_next, logp;

  for (int t = 1; t <= max_len && !live.empty(); ++t) {
    std::vector<int> y_prev;
    for (const auto& h : live) y_prev.push_back(h.ids.empty() ? params.dims.bos : h.ids.back());
    step_batch(params, s, c, y_prev, enc, s_next, c_next, logp);

    cands.clear();
    for (int b = 0; b < static_cast<int>(live.size()); ++b) {
      for (int w = 0; w < V; ++w) {
        if (t == max_len && w != eos) continue;  // only completions fit in the last slot
        cands.push_back({b, w, live[static_cast<std::size_t>(b)].log_prob + logp(w, b)});
      }
    }
    // Cumulative log-prob decides survival; ties favor the smaller id sequence,
    // which is (beam prefix order, token id) because live beams are kept sorted.
    auto cand_less = [&](const Cand& a, const Cand& b) {
      if (a.score != b.score) return a.score > b.score;
      const auto& pa = live[static_cast<std::size_t>(a.beam)].ids;
      const auto& pb = live[static_cast<std::size_t>(b.beam)].ids;
      if (pa != pb) return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
      return a.token < b.token;
    };
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(beam_width), cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<long>(keep), cands.end(), cand_less);

    std::vector<Hypothesis> next;
    std::vector<Index> cols;
    for (std::size_t k = 0; k < keep; ++k) {
      const auto& cd = cands[k];
      Hypothesis h = live[static_cast<std::size_t>(cd.beam)];
      h.ids.push_back(cd.token);
      h.log_prob = cd.score;
      if (cd.token == eos) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
        cols.push_back(cd.beam);
      }
    }
    // Exact stop: a live prefix with cumulative log-prob L can finish no better
    // than L / max_len, so once every live prefix is below the beam_width-th
    // finished score nothing can change the result.
    if (static_cast<int>(finished.size()) >= beam_width && !next.empty()) {
      std::vector<double> fs;
      for (const auto& h : finished) fs.push_back(h.normalized_score());
      std::nth_element(fs.begin(), fs.begin() + (beam_width - 1), fs.end(), std::greater<>());
      const double bar = fs[static_cast<std::size_t>(beam_width - 1)];
      const bool settled = std::all_of(next.begin(), next.end(), [&](const Hypothesis& h) {
        return h.log_prob / static_cast<double>(max_len) < bar;
      });
      if (settled) break;
    }
    MatrixXd s2(s_next.rows(), static_cast<Index>(cols.size()));
    MatrixXd c2(c_next.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      s2.col(static_cast<Index>(k)) = s_next.col(cols[k]);
      c2.col(static_cast<Index>(k)) = c_next.col(cols[k]);
    }
    s.swap(s2);
    c.swap(c2);
    live.swap(next);
  }

  std::sort(finished.begin(), finished.end(), [](const Hypothesis& a, const Hypothesis& b) {
    return better(a, a.normalized_score(), b, b.normalized_score());
  });
  if (static_cast<int>(finished.size()) > beam_width) finished.resize(static_cast<std::size_t>(beam_width));
  return finished;
}

// ---------------------------------------------------------------------------
// Training

double nll_loss(const Seq2SeqParams& p, std::span<const int> input, std::span<const int> target,
                Seq2SeqParams* grad, double grad_scale) {
  if (target.empty()) throw std::invalid_argument("nll_loss: empty target");
  check_ids(p, target);
  const Index H = p.dims.hidden, D = p.dims.emb;
  const Index T = static_cast<Index>(input.size());
  const Index M = static_cast<Index>(target.size());

  EncoderCache ec;
  const EncoderOutput enc = encode_cached(p, input, ec);

  std::vector<int> y_in(static_cast<std::size_t>(M));
  y_in[0] = p.dims.bos;
  for (Index t = 1; t < M; ++t) y_in[static_cast<std::size_t>(t)] = target[static_cast<std::size_t>(t - 1)];

  // Forward through the decoder, caching what the backward pass needs.
  MatrixXd s_prev(H, M), s_out(H, M), c_out(H, M), gates(4 * H, M);
  MatrixXd ctx(2 * H, M), emb(D, M), alpha(T, M);
  std::vector<MatrixXd> tanh_u(static_cast<std::size_t>(M));
  for (Index t = 0; t < M; ++t) emb.col(t) = p.embedding.row(y_in[static_cast<std::size_t>(t)]).transpose();
  gates.noalias() = p.dec_w.leftCols(D) * emb;
  gates.colwise() += p.dec_b;

  const VectorXd zero = VectorXd::Zero(H);
  for (Index t = 0; t < M; ++t) {
    s_prev.col(t) = t == 0 ? enc.init_hidden : VectorXd(s_out.col(t - 1));
    attend(p, s_prev.col(t), enc, tanh_u[static_cast<std::size_t>(t)], alpha.col(t), ctx.col(t));
    gates.col(t).noalias() += p.dec_w.middleCols(D, 2 * H) * ctx.col(t);
    gates.col(t).noalias() += p.dec_w.rightCols(H) * s_prev.col(t);
    lstm_activate(gates.col(t), t == 0 ? zero : VectorXd(c_out.col(t - 1)), c_out.col(t), s_out.col(t));
  }

  MatrixXd q(3 * H + D, M);
  q.topRows(H) = s_out;
  q.middleRows(H, 2 * H) = ctx;
  q.bottomRows(D) = emb;
  MatrixXd logp = p.out_w * q;
  logp.colwise() += p.out_b;
  double loss = 0.0;
  for (Index t = 0; t < M; ++t) {
    log_softmax_inplace(logp.col(t));
    loss -= logp(target[static_cast<std::size_t>(t)], t);
  }
  if (!grad) return loss;

  // Backward.
  Seq2SeqParams& g = *grad;
  MatrixXd dlogits = logp.array().exp();
  for (Index t = 0; t < M; ++t) dlogits(target[static_cast<std::size_t>(t)], t) -= 1.0;
  dlogits *= grad_scale;
  g.out_w.noalias() += dlogits * q.transpose();
  g.out_b += dlogits.rowwise().sum();
  const MatrixXd dq = p.out_w.transpose() * dlogits;

  MatrixXd dz(4 * H, M), du(H, M), dctx_all(2 * H, M);
  MatrixXd dkeys = MatrixXd::Zero(H, T);
  VectorXd ds = VectorXd::Zero(H), dc = VectorXd::Zero(H), dc_prev(H);
  const auto w_ctx = p.dec_w.middleCols(D, 2 * H);
  const auto w_rec = p.dec_w.rightCols(H);
  for (Index t = M - 1; t >= 0; --t) {
    ds += dq.col(t).head(H);
    lstm_backward(gates.col(t), t == 0 ? zero : VectorXd(c_out.col(t - 1)), c_out.col(t), ds, dc,
                  dz.col(t), dc_prev);
    VectorXd dctx = dq.col(t).segment(H, 2 * H);
    dctx.noalias() += w_ctx.transpose() * dz.col(t);
    dctx_all.col(t) = dctx;
    VectorXd ds_prev = w_rec.transpose() * dz.col(t);

    // attention
    const auto& tu = tanh_u[static_cast<std::size_t>(t)];
    const VectorXd a = alpha.col(t);
    const VectorXd dalpha = enc.states.transpose() * dctx;
    const VectorXd de = a.cwiseProduct((dalpha.array() - a.dot(dalpha)).matrix());
    const MatrixXd dpre = ((p.att_v * de.transpose()).array() * (1.0 - tu.array().square())).matrix();
    dkeys += dpre;
    du.col(t) = dpre.rowwise().sum();
    g.att_v.noalias() += tu * de;
    ds_prev.noalias() += p.att_state_w.transpose() * du.col(t);

    ds = ds_prev;
    dc = dc_prev;
  }
  const VectorXd& ds0 = ds;

  g.dec_w.leftCols(D).noalias() += dz * emb.transpose();
  g.dec_w.middleCols(D, 2 * H).noalias() += dz * ctx.transpose();
  g.dec_w.rightCols(H).noalias() += dz * s_prev.transpose();
  g.dec_b += dz.rowwise().sum();
  g.att_state_w.noalias() += du * s_prev.transpose();
  g.att_b += du.rowwise().sum();

  MatrixXd demb = dq.bottomRows(D);
  demb.noalias() += p.dec_w.leftCols(D).transpose() * dz;
  for (Index t = 0; t < M; ++t) g.embedding.row(y_in[static_cast<std::size_t>(t)]) += demb.col(t).transpose();

  MatrixXd dstates = dctx_all * alpha.transpose();
  g.att_source_w.noalias() += dkeys * enc.states.transpose();
  dstates.noalias() += p.att_source_w.transpose() * dkeys;

  g.init_w.noalias() += ds0 * ec.bwd.hid.col(0).transpose();
  g.init_b += ds0;
  dstates.bottomRows(H).col(0).noalias() += p.init_w.transpose() * ds0;

  // Encoder directions.
  MatrixXd dx = MatrixXd::Zero(D, T);
  auto backprop_direction = [&](const MatrixXd& w, const DirectionCache& cache, bool reverse,
                                const MatrixXd& dh_out, MatrixXd& gw, VectorXd& gb) {
    MatrixXd dzd(4 * H, T), hprev = MatrixXd::Zero(H, T);
    VectorXd dh_next = VectorXd::Zero(H), dc_next = VectorXd::Zero(H), dcp(H);
    for (Index s = T - 1; s >= 0; --s) {
      const Index j = reverse ? T - 1 - s : s;
      const Index prev = reverse ? j + 1 : j - 1;
      const bool has_prev = s > 0;
      VectorXd dh = dh_out.col(j) + dh_next;
      lstm_backward(cache.gates.col(j), has_prev ? VectorXd(cache.cell.col(prev)) : zero, cache.cell.col(j),
                    dh, dc_next, dzd.col(j), dcp);
      if (has_prev) hprev.col(j) = cache.hid.col(prev);
      dh_next.noalias() = w.rightCols(H).transpose() * dzd.col(j);
      dc_next = dcp;
    }
    gw.leftCols(D).noalias() += dzd * ec.x.transpose();
    gw.rightCols(H).noalias() += dzd * hprev.transpose();
    gb += dzd.rowwise().sum();
    dx.noalias() += w.leftCols(D).transpose() * dzd;
  };
  backprop_direction(p.enc_fwd_w, ec.fwd, false, dstates.topRows(H), g.enc_fwd_w, g.enc_fwd_b);
  backprop_direction(p.enc_bwd_w, ec.bwd, true, dstates.bottomRows(H), g.enc_bwd_w, g.enc_bwd_b);
  for (Index j = 0; j < T; ++j) g.embedding.row(input[static_cast<std::size_t>(j)]) += dx.col(j).transpose();

  return loss;
}

double sgd_update(Seq2SeqParams& params, const Seq2SeqParams& grad, double step_size, double clip_norm) {
  if (step_size <= 0.0) throw std::invalid_argument("sgd_update: step_size must be positive");
  if (!grad.all_finite()) throw std::runtime_error("sgd_update: non-finite gradient (training diverged)");
  const double norm = std::sqrt(grad.squared_norm());
  double factor = 1.0;
  if (clip_norm > 0.0 && norm > clip_norm) factor = clip_norm / norm;
  if (norm == 0.0) return 0.0;
  params.add_scaled(grad, -step_size * factor);
  return norm * factor;
}

}  // namespace samia
