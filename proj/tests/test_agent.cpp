#include <doctest.h>

#include <cmath>
#include <random>

#include "samia/agent_model.hpp"
#include "samia/trainer.hpp"
#include "samia/user_model.hpp"
#include "test_util.hpp"

using namespace samia;

namespace {

Vocabulary small_vocab(const SlotSchema& schema, std::vector<std::string> words) {
  auto tokens = special_tokens(schema);
  tokens.insert(tokens.end(), words.begin(), words.end());
  return Vocabulary(tokens);
}

// Every lexicon value plus a few question words, so random models emit slot values often.
Vocabulary slot_heavy_vocab(const SlotSchema& schema) {
  std::vector<std::string> words = {"?", "what", "or", "order", "placed", ".", "ok", "building"};
  for (const auto& slot : schema.slots)
    for (const auto& v : slot.values)
      for (const auto& t : split_tokens(v))
        if (std::find(words.begin(), words.end(), t) == words.end()) words.push_back(t);
  return small_vocab(schema, words);
}

Config tiny_config() {
  Config c;
  c.d_hidden = 8;
  c.d_emb = 6;
  c.max_len = 8;
  c.beam_width = 6;
  c.rerank_top = 4;
  c.user_beam_width = 4;
  return c;
}

}  // namespace

TEST_CASE("agent input encoding") {
  const auto schema = SlotSchema::coffee();
  const auto vocab = small_vocab(schema, {"hot", "grande", "latte", "i", "want", "coffee", "no", "."});
  const int sep = Vocabulary::kSep, eos = Vocabulary::kEos;

  const Ids a = encode_agent_input({{{"temperature", "hot"}}, {"grande"}}, vocab, schema, 30);
  CHECK(a == Ids{vocab.marker_id("temperature"), vocab.id("hot"), sep, vocab.id("grande"), eos});

  const Ids b = encode_agent_input({{}, {"i", "want", "coffee"}}, vocab, schema, 30);
  CHECK(b == Ids{sep, vocab.id("i"), vocab.id("want"), vocab.id("coffee"), eos});

  // tag segment follows schema order, not map order
  const Ids c = encode_agent_input({{{"temperature", "hot"}, {"taste", "latte"}}, {}}, vocab, schema, 30);
  CHECK(c == Ids{vocab.marker_id("taste"), vocab.id("latte"), vocab.marker_id("temperature"), vocab.id("hot"),
                 sep, eos});

  SUBCASE("without tags only the utterance remains") {
    const Ids d = encode_agent_input({{{"temperature", "hot"}}, {"grande"}}, vocab, schema, 30, false);
    CHECK(d == Ids{sep, vocab.id("grande"), eos});
  }

  SUBCASE("truncation drops the utterance tail, never the tags") {
    const SlotState full = {{"taste", "latte"},
                            {"size", "grande"},
                            {"temperature", "hot"},
                            {"address", "no . <num> software building"}};
    Tokens long_text(40, "coffee");
    const Ids e = encode_agent_input({full, long_text}, vocab, schema, 30);
    REQUIRE(e.size() == 30u);
    CHECK(e.back() == eos);
    const Ids tags_only = encode_agent_input({full, {}}, vocab, schema, 100);
    // tags_only = tag segment, SEP, EOS
    for (std::size_t k = 0; k + 1 < tags_only.size(); ++k) CHECK(e[k] == tags_only[k]);
    for (std::size_t k = tags_only.size() - 1; k + 1 < e.size(); ++k) CHECK(e[k] == vocab.id("coffee"));
  }
}

TEST_CASE("tagged and untagged examples share targets and utterances") {
  const auto schema = SlotSchema::coffee();
  const auto sessions = generate_corpus(schema, 40, 11);
  const auto vocab = build_vocab(sessions, 1, schema);
  const auto ex = extract_agent_examples(sessions);
  const auto with = to_examples(ex, vocab, schema, 30, true);
  const auto without = to_examples(ex, vocab, schema, 30, false);
  REQUIRE(with.size() == without.size());
  for (std::size_t k = 0; k < with.size(); ++k) {
    CHECK(with[k].target == without[k].target);
    // the tag segment may push the utterance tail out, so compare up to the shorter one
    const auto sep = std::find(with[k].input.begin(), with[k].input.end(), Vocabulary::kSep);
    const Ids tail(sep, with[k].input.end() - 1);
    REQUIRE(tail.size() <= without[k].input.size() - 1);
    CHECK(std::equal(tail.begin(), tail.end(), without[k].input.begin()));
    if (tail.size() + 1 == without[k].input.size()) CHECK(Ids(sep, with[k].input.end()) == without[k].input);
  }
}

TEST_CASE("one agent example per agent turn that follows a user turn") {
  const auto sessions = generate_corpus(SlotSchema::coffee(), 30, 4);
  std::size_t agent_turns = 0;
  for (const auto& s : sessions)
    for (const auto& t : s.turns) agent_turns += t.role == Role::Agent;
  const auto ex = extract_agent_examples(sessions);
  CHECK(ex.size() == agent_turns);
  CHECK(ex.front().input.user_text == sessions.front().turns[0].text);
  CHECK(ex.front().input.tags == sessions.front().turns[1].tags_before);
}

TEST_CASE("policy gradient equals reward-scaled nll gradient") {
  std::mt19937_64 rng(5);
  ModelDims dims{7, 5, 6, 1, 2};
  for (int trial = 0; trial < 5; ++trial) {
    const auto agent = Seq2SeqParams::random(dims, 100 + static_cast<std::uint64_t>(trial), 0.3);
    const auto input = test::random_ids(rng, dims.vocab, 4);
    const Hypothesis h = sample(agent, input, 6, rng);
    const double reward = 0.25 + 0.5 * trial;

    auto pg = Seq2SeqParams::zeros(dims);
    accumulate_policy_gradient(agent, input, h.ids, reward, pg);

    auto reference = Seq2SeqParams::zeros(dims);
    nll_loss(agent, input, h.ids, &reference);
    const auto a = pg.tensors();
    const auto b = reference.tensors();
    for (std::size_t t = 0; t < a.size(); ++t)
      for (Eigen::Index k = 0; k < a[t].rows * a[t].cols; ++k)
        CHECK(std::abs(a[t].data[k] - reward * b[t].data[k]) <= 1e-10);
  }
}

TEST_CASE("policy gradient matches finite differences of -r log p(sample)") {
  std::mt19937_64 rng(8);
  ModelDims dims{6, 4, 5, 1, 2};
  const auto agent = Seq2SeqParams::random(dims, 3, 0.4);
  const auto input = test::random_ids(rng, dims.vocab, 3);
  const Hypothesis h = sample(agent, input, 5, rng);
  const double reward = 0.8;
  auto pg = Seq2SeqParams::zeros(dims);
  accumulate_policy_gradient(agent, input, h.ids, reward, pg);

  // -r log p(sample) computed from per-step distributions, not from nll_loss
  auto surrogate = [&](const Seq2SeqParams& p) {
    const auto enc = encode_seq(p, input);
    auto state = initial_state(p, enc);
    int prev = dims.bos;
    double logp = 0.0;
    for (int y : h.ids) {
      const auto step = decode_step(p, state, prev, enc);
      logp += std::log(step.probs(y));
      state = step.state;
      prev = y;
    }
    return -reward * logp;
  };
  auto p = agent;
  auto views = p.tensors();
  const auto g = std::as_const(pg).tensors();
  std::uniform_int_distribution<int> pick_t(0, static_cast<int>(views.size()) - 1);
  for (int k = 0; k < 40; ++k) {
    const auto t = static_cast<std::size_t>(pick_t(rng));
    std::uniform_int_distribution<Eigen::Index> pick_c(0, views[t].rows * views[t].cols - 1);
    const auto c = pick_c(rng);
    double& x = views[t].data[c];
    const double saved = x, step = 1e-5;
    x = saved + step;
    const double up = surrogate(p);
    x = saved - step;
    const double down = surrogate(p);
    x = saved;
    CHECK(g[t].data[c] == doctest::Approx((up - down) / (2 * step)).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("zero-reward batch leaves the agent bit-identical") {
  const auto schema = SlotSchema::coffee();
  const auto vocab = slot_heavy_vocab(schema);
  const Config cfg = tiny_config();
  const auto user = Seq2SeqParams::random(model_dims(vocab, cfg), 1, 0.3);
  auto agent = Seq2SeqParams::random(model_dims(vocab, cfg), 2, 0.3);
  const Simulation sim{user, vocab, schema, cfg};

  // with every slot filled the indicator is 0 for any exchange
  const SlotState full = {{"taste", "latte"}, {"size", "tall"}, {"temperature", "hot"}, {"address", "<num> building"}};
  std::vector<AgentExample> ex;
  for (int k = 0; k < 8; ++k) ex.push_back({{full, {"ok"}}, {}});
  const auto batch = make_rl_inputs(ex, vocab, schema, cfg.max_len);
  const auto before = agent;
  auto grad = Seq2SeqParams::zeros(agent.dims);
  std::mt19937_64 rng(3);
  const RlStats st = rl_step(agent, batch, sim, rng, grad);
  CHECK(st.samples == 8);
  CHECK(st.rewarded == 0);
  CHECK_FALSE(st.updated);
  CHECK(agent == before);
}

TEST_CASE("bandit surrogate: rewarded sequence gains probability every step") {
  // V=3 with bos=1, eos=2: responses are strings over {0} ended by eos. Reward 1
  // for [0, eos], 0 otherwise.
  ModelDims dims{3, 3, 4, 1, 2};
  auto agent = Seq2SeqParams::random(dims, 17, 0.3);
  const std::vector<int> input = {0, 0, 2};
  const std::vector<int> rewarded = {0, 2};
  auto prob = [&] { return std::exp(-nll_loss(agent, input, rewarded)); };

  std::mt19937_64 rng(4);
  auto grad = Seq2SeqParams::zeros(dims);
  double p = prob();
  const double start = p;
  int updates = 0;
  for (int step = 0; step < 200; ++step) {
    const Hypothesis h = sample(agent, input, 2, rng);
    const double reward = h.ids == rewarded ? 1.0 : 0.0;
    grad.set_zero();
    accumulate_policy_gradient(agent, input, h.ids, reward, grad);
    if (reward != 0.0) {
      sgd_update(agent, grad, 0.1, 1e9);
      ++updates;
    }
    const double next = prob();
    CHECK(next >= p);
    p = next;
  }
  CHECK(updates > 0);
  CHECK(p > start + 0.1);
}

TEST_CASE("rerank selection rules") {
  auto cand = [](double score, std::optional<double> reward) {
    ScoredCandidate c;
    c.score = score;
    c.reward = reward;
    return c;
  };

  SUBCASE("exactly one rewarded candidate in the top entries wins") {
    RerankResult r;
    r.candidates = {cand(-0.1, 0.0), cand(-0.2, 0.0), cand(-0.3, 1.0), cand(-0.4, 0.0), cand(-0.5, 0.0),
                    cand(-0.6, std::nullopt)};
    rank_by_reward(r, 5);
    CHECK(r.chosen == 2);
    CHECK(r.ranking == std::vector<std::size_t>{2, 0, 1, 3, 4, 5});
  }
  SUBCASE("no reward keeps the beam top-1 and the beam order") {
    RerankResult r;
    r.candidates = {cand(-0.1, 0.0), cand(-0.2, 0.0), cand(-0.3, 0.0)};
    rank_by_reward(r, 3);
    CHECK(r.chosen == 0);
    CHECK(r.ranking == std::vector<std::size_t>{0, 1, 2});
  }
  SUBCASE("reward ties go to the better model score") {
    RerankResult r;
    r.candidates = {cand(-0.05, 0.0), cand(-0.9, 1.0), cand(-0.2, 1.0)};
    rank_by_reward(r, 3);
    CHECK(r.chosen == 2);
    CHECK(r.ranking == std::vector<std::size_t>{2, 1, 0});
  }
  SUBCASE("top entries must be scored") {
    RerankResult r;
    r.candidates = {cand(-0.1, 0.0), cand(-0.2, std::nullopt)};
    CHECK_THROWS_AS(rank_by_reward(r, 2), std::invalid_argument);
  }
}

TEST_CASE("rerank_infer never passes over a rewarded candidate") {
  const auto schema = SlotSchema::coffee();
  const auto vocab = slot_heavy_vocab(schema);
  const Config cfg = tiny_config();
  const auto user = Seq2SeqParams::random(model_dims(vocab, cfg), 21, 0.5);
  const auto agent = Seq2SeqParams::random(model_dims(vocab, cfg), 22, 0.5);
  const Simulation sim{user, vocab, schema, cfg};
  std::mt19937_64 rng(9);
  int with_reward = 0, without = 0;
  for (int k = 0; k < 30; ++k) {
    AgentInput in;
    if (k % 2) in.tags["temperature"] = "hot";
    if (k % 3 == 0) in.tags["taste"] = "latte";
    if (k % 5 == 0)  // nothing left to ask: no candidate can earn a reward
      in.tags = {{"taste", "latte"}, {"size", "tall"}, {"temperature", "hot"}, {"address", "<num> building"}};
    in.user_text = {"ok", vocab.token(static_cast<int>(rng() % static_cast<std::uint64_t>(vocab.size())))};
    const auto r = rerank_infer(agent, sim, in);
    REQUIRE(r.candidates.size() <= static_cast<std::size_t>(cfg.beam_width));
    double best = 0.0;
    for (std::size_t i = 0; i < std::min<std::size_t>(cfg.rerank_top, r.candidates.size()); ++i) {
      REQUIRE(r.candidates[i].reward.has_value());
      // reward agrees with the indicator of the logged exchange
      CHECK(*r.candidates[i].reward ==
            indicator(r.candidates[i].text, r.candidates[i].user_reply, in.tags, schema));
      best = std::max(best, *r.candidates[i].reward);
    }
    for (std::size_t i = cfg.rerank_top; i < r.candidates.size(); ++i) CHECK_FALSE(r.candidates[i].reward);
    if (best > 0) {
      ++with_reward;
      CHECK(*r.response().reward == best);
    } else {
      ++without;
      CHECK(r.chosen == 0);
    }
  }
  CHECK(with_reward > 0);
  CHECK(without > 0);
}

TEST_CASE("user reply selection") {
  const auto schema = SlotSchema::coffee();
  const auto vocab = slot_heavy_vocab(schema);
  Config cfg = tiny_config();
  const auto user = Seq2SeqParams::random(model_dims(vocab, cfg), 1);
  auto hyp = [&](const Tokens& t) {
    Hypothesis h;
    for (const auto& w : t) h.ids.push_back(vocab.id(w));
    h.ids.push_back(Vocabulary::kEos);
    h.finished = true;
    return h;
  };
  const std::vector<Hypothesis> cands = {hyp({"ok"}), hyp({"latte"}), hyp({"hot"})};
  const Tokens agent = {"what", "?"};

  cfg.user_reply_selection = ReplySelection::IndicatorBest;
  CHECK(select_user_reply(cands, agent, {}, {user, vocab, schema, cfg}) == Tokens{"latte"});
  CHECK(select_user_reply(cands, agent, {{"taste", "mocha"}}, {user, vocab, schema, cfg}) == Tokens{"hot"});
  CHECK(select_user_reply(cands, agent, {{"taste", "mocha"}, {"temperature", "cold"}},
                          {user, vocab, schema, cfg}) == Tokens{"ok"});
  cfg.user_reply_selection = ReplySelection::Top1;
  CHECK(select_user_reply(cands, agent, {}, {user, vocab, schema, cfg}) == Tokens{"ok"});
}

TEST_CASE("reward of a complete order is the negated baseline without simulation") {
  const auto schema = SlotSchema::coffee();
  const auto vocab = slot_heavy_vocab(schema);
  Config cfg = tiny_config();
  const auto user = Seq2SeqParams::random(model_dims(vocab, cfg), 1);
  const SlotState full = {{"taste", "latte"}, {"size", "tall"}, {"temperature", "hot"}, {"address", "<num> building"}};
  const auto r = rl_reward({"hot", "or", "cold", "?"}, {full, {"ok"}}, {user, vocab, schema, cfg});
  CHECK(r.reward == 0.0);
  CHECK(r.indicator == 0);
  CHECK(r.user_reply.empty());
}

TEST_CASE("quick question answer is learnable") {
  const auto schema = SlotSchema::coffee();
  const Tokens question = tokenize("How long will it take?");
  const Tokens answer = tokenize("Usually about one hour.");
  Tokens words = question;
  words.insert(words.end(), answer.begin(), answer.end());
  const auto vocab = small_vocab(schema, words);
  const SlotState full = {{"taste", "latte"}, {"size", "tall"}, {"temperature", "hot"}, {"address", "<num> building"}};
  Config cfg;
  cfg.d_hidden = 16;
  cfg.d_emb = 8;
  const std::vector<AgentExample> ex = {{{full, question}, answer}};
  const auto data = to_examples(ex, vocab, schema, cfg.max_len, true);
  TrainOptions opt;
  opt.learning_rate = 0.5;
  opt.max_epochs = 150;
  opt.patience = 150;
  const auto res = train_supervised(Seq2SeqParams::random(model_dims(vocab, cfg), 3, cfg.init_scale), data, data, opt);
  CHECK(corpus_perplexity(res.params, data) < 2.0);
}

TEST_CASE("joint training with only supervised steps continues pretraining") {
  const auto schema = SlotSchema::coffee();
  const auto sessions = generate_corpus(schema, 12, 2);
  const auto vocab = build_vocab(sessions, 1, schema);
  Config cfg = tiny_config();
  cfg.max_len = 20;
  cfg.batch_size = 8;
  cfg.sl_steps = 1;
  cfg.rl_steps = 0;
  cfg.joint_epochs = 1;
  auto all = to_examples(extract_agent_examples(sessions), vocab, schema, cfg.max_len, true);
  all.resize(32);  // whole batches, so both loops see identical batches
  const auto init = Seq2SeqParams::random(model_dims(vocab, cfg), 6, 0.1);
  const auto user = Seq2SeqParams::random(model_dims(vocab, cfg), 7, 0.1);

  const auto joint = joint_train(init, all, all, {}, {user, vocab, schema, cfg}, 1.0, 99);
  TrainOptions opt = train_options(cfg, 99);
  opt.max_epochs = 1;
  opt.lr_decay = 1.0;
  const auto sl = train_supervised(init, all, all, opt);
  CHECK(joint.params == sl.params);
  CHECK(joint.rl_start_epoch == -1);
}

TEST_CASE("joint training with only reinforcement steps is an rl_step loop") {
  const auto schema = SlotSchema::coffee();
  const auto vocab = slot_heavy_vocab(schema);
  Config cfg = tiny_config();
  cfg.sl_steps = 0;
  cfg.rl_steps = 1;
  cfg.rl_batch_size = 4;
  cfg.joint_epochs = 2;
  cfg.fluency_gate = 1e9;
  const auto user = Seq2SeqParams::random(model_dims(vocab, cfg), 31, 0.5);
  const auto init = Seq2SeqParams::random(model_dims(vocab, cfg), 32, 0.5);
  std::vector<AgentExample> ex;
  for (const auto& w : {"latte", "hot", "tall", "ok", "what", "?", "mocha", "cold"}) ex.push_back({{{}, {w}}, {}});
  const auto inputs = make_rl_inputs(ex, vocab, schema, cfg.max_len);
  const std::vector<Example> val = {{inputs[0].ids, {Vocabulary::kEos}}};
  const Simulation sim{user, vocab, schema, cfg};
  const std::uint64_t seed = 5;
  const auto joint = joint_train(init, {}, val, inputs, sim, 1.0, seed);
  CHECK(joint.rl_start_epoch == 0);

  auto agent = init;
  auto grad = Seq2SeqParams::zeros(agent.dims);
  std::mt19937_64 rng(seed);
  int pass = 0;
  for (int epoch = 0; epoch < cfg.joint_epochs; ++epoch) {
    const auto order = epoch_order(inputs.size(), seed ^ 0x5bd1e995ULL, pass++);
    for (std::size_t start = 0; start < order.size(); start += 4) {
      std::vector<RlInput> batch;
      for (std::size_t k = start; k < start + 4; ++k) batch.push_back(inputs[order[k]]);
      rl_step(agent, batch, sim, rng, grad);
    }
  }
  CHECK(joint.params == agent);
}
