#include "samia/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "samia/agent_model.hpp"
#include "samia/checkpoint.hpp"
#include "samia/corpus.hpp"
#include "samia/text.hpp"
#include "samia/user_model.hpp"

namespace samia {

namespace {

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

std::string fmt(double x) {
  std::ostringstream o;
  o << x;
  return o.str();
}

struct Loaded {
  SlotSchema schema;
  Vocabulary vocab;
  CorpusSplit split;
};

Loaded load_inputs(const Config& config, const ArtifactPaths& paths) {
  require_file(paths.corpus());
  require_file(paths.schema());
  require_file(paths.vocab());
  Loaded l{load_schema(paths.schema()), load_vocab(paths.vocab()), {}};
  l.split = split_corpus(load_corpus(paths.corpus()), config.train_ratio, config.validation_ratio,
                         config.test_ratio, StageSeeds::from(config.seed).split);
  return l;
}

Seq2SeqParams load_model(const std::filesystem::path& path, const Vocabulary& vocab) {
  require_file(path);
  return load_checkpoint(path, vocab.hash()).params;
}

void save_model(const std::filesystem::path& path, const std::string& role, const Vocabulary& vocab,
                const Seq2SeqParams& params) {
  save_checkpoint(path, {role, vocab.hash(), params});
}

std::string trace(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt(x);
  return s;
}

}  // namespace

StageSeeds StageSeeds::from(std::uint64_t seed) {
  return {seed, seed + 1, seed * 31 + 101, seed * 31 + 202, seed * 31 + 303, seed * 31 + 404, seed * 31 + 505};
}

void require_file(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw MissingArtifact(path);
}

void step_gen_corpus(const Config& config, const ArtifactPaths& paths, const Logger& log) {
  config.validate();
  std::filesystem::create_directories(paths.dir);
  const SlotSchema schema = SlotSchema::coffee();
  const auto sessions = generate_corpus(schema, config.n_sessions, StageSeeds::from(config.seed).corpus,
                                        config.generator);
  if (!paths.corpus().parent_path().empty()) std::filesystem::create_directories(paths.corpus().parent_path());
  save_corpus(paths.corpus(), sessions);
  save_schema(paths.schema(), schema);
  say(log, "wrote " + std::to_string(sessions.size()) + " sessions to " + paths.corpus().string());
}

void step_build_vocab(const Config& config, const ArtifactPaths& paths, const Logger& log) {
  config.validate();
  require_file(paths.corpus());
  require_file(paths.schema());
  const auto schema = load_schema(paths.schema());
  const auto split = split_corpus(load_corpus(paths.corpus()), config.train_ratio, config.validation_ratio,
                                  config.test_ratio, StageSeeds::from(config.seed).split);
  const auto vocab = build_vocab(split.train, config.min_freq, schema);
  save_vocab(paths.vocab(), vocab);
  say(log, "vocabulary of " + std::to_string(vocab.size()) + " tokens written to " + paths.vocab().string());
}

void step_train_user(const Config& config, const ArtifactPaths& paths, const Logger& log) {
  config.validate();
  const auto in = load_inputs(config, paths);
  auto res = train_user(extract_user_pairs(in.split.train), extract_user_pairs(in.split.validation), in.vocab,
                        config, StageSeeds::from(config.seed).user, log);
  save_model(paths.user(), "user", in.vocab, res.params);
  say(log, "user model: validation ppl trace " + trace(res.validation_ppl));
}

void step_train_agent(const Config& config, const ArtifactPaths& paths, AgentVariant variant, const Logger& log) {
  config.validate();
  const auto in = load_inputs(config, paths);
  const auto seeds = StageSeeds::from(config.seed);
  if (variant != AgentVariant::Slt) {
    auto res = pretrain_agent(in.split.train, in.split.validation, in.vocab, in.schema, config, seeds.slnt, false, log);
    save_model(paths.slnt(), "slnt", in.vocab, res.params);
    say(log, "SLNT agent: validation ppl trace " + trace(res.validation_ppl));
  }
  if (variant != AgentVariant::Slnt) {
    auto res = pretrain_agent(in.split.train, in.split.validation, in.vocab, in.schema, config, seeds.slt, true, log);
    save_model(paths.slt(), "slt", in.vocab, res.params);
    say(log, "SLT agent: validation ppl trace " + trace(res.validation_ppl));
  }
}

void step_rl_finetune(const Config& config, const ArtifactPaths& paths, const Logger& log) {
  config.validate();
  const auto in = load_inputs(config, paths);
  const auto user = load_model(paths.user(), in.vocab);
  auto agent = load_model(paths.slt(), in.vocab);

  const auto train_ex = extract_agent_examples(in.split.train);
  const auto sl_train = to_examples(train_ex, in.vocab, in.schema, config.max_len, true);
  const auto sl_val = to_examples(extract_agent_examples(in.split.validation), in.vocab, in.schema, config.max_len, true);
  const auto rl_inputs = make_rl_inputs(train_ex, in.vocab, in.schema, config.max_len);
  const double reference = corpus_perplexity(agent, sl_val);
  say(log, "pretrained agent validation ppl " + fmt(reference));

  const Simulation sim{user, in.vocab, in.schema, config};
  auto res = joint_train(agent, sl_train, sl_val, rl_inputs, sim, reference, StageSeeds::from(config.seed).rl, log);
  save_model(paths.samia(), "samia", in.vocab, res.params);
}

ExperimentResult step_evaluate(const Config& config, const ArtifactPaths& paths, const Logger& log) {
  config.validate();
  // name the first missing checkpoint before doing any work
  for (const auto& p : {paths.user(), paths.slnt(), paths.slt(), paths.samia()}) require_file(p);
  const auto in = load_inputs(config, paths);
  const auto seeds = StageSeeds::from(config.seed);

  if (!config.eval_retrain) {
    const auto user = load_model(paths.user(), in.vocab);
    const auto slnt = load_model(paths.slnt(), in.vocab);
    const auto slt = load_model(paths.slt(), in.vocab);
    const auto samia = load_model(paths.samia(), in.vocab);
    auto result = run_experiment({user, slnt, slt, samia}, in.vocab, in.schema, config, in.split.test, seeds.eval, log);
    write_reports(paths.reports(), result);
    say(log, report_text(result.report));
    return result;
  }

  // Full-retrain mode: every repeat trains all four models from its own seed
  // and contributes one evaluation pass.
  ExperimentResult merged;
  std::vector<std::vector<double>> reward(4), n1(4), n3(4), n5(4);
  std::vector<double> truth;
  for (int r = 0; r < config.eval_repeats; ++r) {
    Config c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(r) * 7919;
    c.eval_repeats = 1;
    const auto s = StageSeeds::from(c.seed);
    say(log, "retrain repeat " + std::to_string(r + 1));
    auto user = train_user(extract_user_pairs(in.split.train), extract_user_pairs(in.split.validation), in.vocab, c,
                           s.user, log).params;
    auto slnt = pretrain_agent(in.split.train, in.split.validation, in.vocab, in.schema, c, s.slnt, false, log).params;
    auto slt = pretrain_agent(in.split.train, in.split.validation, in.vocab, in.schema, c, s.slt, true, log).params;
    const auto train_ex = extract_agent_examples(in.split.train);
    const auto sl_train = to_examples(train_ex, in.vocab, in.schema, c.max_len, true);
    const auto sl_val = to_examples(extract_agent_examples(in.split.validation), in.vocab, in.schema, c.max_len, true);
    const Simulation sim{user, in.vocab, in.schema, c};
    auto samia = joint_train(slt, sl_train, sl_val, make_rl_inputs(train_ex, in.vocab, in.schema, c.max_len), sim,
                             corpus_perplexity(slt, sl_val), s.rl, log)
                     .params;
    auto res = run_experiment({user, slnt, slt, samia}, in.vocab, in.schema, c, in.split.test, s.eval, log);
    for (std::size_t m = 0; m < 4; ++m) {
      reward[m].push_back(res.report.models[m].reward.mean);
      n1[m].push_back(res.report.models[m].ndcg1.mean);
      n3[m].push_back(res.report.models[m].ndcg3.mean);
      n5[m].push_back(res.report.models[m].ndcg5.mean);
    }
    truth.push_back(res.report.ground_truth.mean);
    if (r == 0) merged = std::move(res);
  }
  merged.report.repeats = config.eval_repeats;
  merged.report.ground_truth = summarize(truth);
  for (std::size_t m = 0; m < 4; ++m) {
    merged.report.models[m].reward = summarize(reward[m]);
    merged.report.models[m].ndcg1 = summarize(n1[m]);
    merged.report.models[m].ndcg3 = summarize(n3[m]);
    merged.report.models[m].ndcg5 = summarize(n5[m]);
  }
  write_reports(paths.reports(), merged);
  say(log, report_text(merged.report));
  return merged;
}

ExperimentResult run_pipeline(const Config& config, const ArtifactPaths& paths, const Logger& log) {
  step_gen_corpus(config, paths, log);
  step_build_vocab(config, paths, log);
  step_train_user(config, paths, log);
  step_train_agent(config, paths, AgentVariant::Both, log);
  step_rl_finetune(config, paths, log);
  return step_evaluate(config, paths, log);
}

}  // namespace samia
