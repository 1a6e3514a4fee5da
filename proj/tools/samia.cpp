// Command-line driver: corpus generation, training, evaluation and a chat demo.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "samia/agent_model.hpp"
#include "samia/checkpoint.hpp"
#include "samia/config.hpp"
#include "samia/corpus.hpp"
#include "samia/pipeline.hpp"
#include "samia/text.hpp"

using namespace samia;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "artifacts";
  std::string checkpoint;
  std::string corpus;
  std::optional<int> n_sessions;
  std::string variant = "both";
  std::vector<std::string> sets;  // key=value overrides
};

Config make_config(const Options& o) {
  Config c;
  if (!o.config_path.empty()) {
    if (!std::filesystem::is_regular_file(o.config_path)) throw MissingArtifact(o.config_path);
    c = load_config(o.config_path);
  }
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(kv, "expected key=value");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    set_config_value(c, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (o.seed) c.seed = *o.seed;
  if (o.n_sessions) c.n_sessions = *o.n_sessions;
  c.validate();
  return c;
}

ArtifactPaths make_paths(const Options& o) {
  ArtifactPaths p;
  p.dir = o.out;
  p.corpus_override = o.corpus;
  return p;
}

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

std::string show_tags(const SlotState& tags) {
  std::string s = "{";
  for (const auto& [k, v] : tags) s += (s.size() > 1 ? ", " : "") + k + ": " + v;
  return s + "}";
}

int chat(const Config& config, const ArtifactPaths& paths, const std::string& checkpoint) {
  require_file(paths.vocab());
  require_file(paths.schema());
  const std::filesystem::path agent_path = checkpoint.empty() ? paths.samia() : std::filesystem::path(checkpoint);
  require_file(paths.user());
  require_file(agent_path);
  const auto vocab = load_vocab(paths.vocab());
  const auto schema = load_schema(paths.schema());
  const auto user = load_checkpoint(paths.user(), vocab.hash()).params;
  const auto agent = load_checkpoint(agent_path, vocab.hash()).params;
  const Simulation sim{user, vocab, schema, config, &agent};

  SlotState tags;
  std::string line;
  std::cout << "type your order, one line per turn (ctrl-d to quit)\n> " << std::flush;
  while (std::getline(std::cin, line)) {
    const Tokens said = tokenize(line);
    tags = merge(tags, extract_slots(said, schema));
    const auto rr = rerank_infer(agent, sim, {tags, said});
    std::cout << "agent: " << join_tokens(rr.response().text) << "\n";
    std::cout << "tags:  " << show_tags(tags) << "\n> " << std::flush;
  }
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"samia: simulation-assisted task-oriented dialogue agent"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "config file (key = value)");
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--out", o.out, "artifact directory")->capture_default_str();
    sub->add_option("--corpus", o.corpus, "corpus file (default <out>/corpus.jsonl)");
    sub->add_option("--set", o.sets, "override a config key, key=value (repeatable)");
  };

  auto* gen = app.add_subcommand("gen-corpus", "generate the synthetic corpus and schema");
  common(gen);
  gen->add_option("--n", o.n_sessions, "number of sessions");
  auto* vocab = app.add_subcommand("build-vocab", "build the vocabulary from the training split");
  common(vocab);
  auto* tuser = app.add_subcommand("train-user", "train the user model");
  common(tuser);
  auto* tagent = app.add_subcommand("train-agent", "supervised agent training (SLNT and/or SLT)");
  common(tagent);
  tagent->add_option("--variant", o.variant, "slnt, slt or both")
      ->check(CLI::IsMember({"slnt", "slt", "both"}))
      ->capture_default_str();
  auto* rl = app.add_subcommand("rl-finetune", "joint supervised and reinforcement training from SLT");
  common(rl);
  auto* ev = app.add_subcommand("evaluate", "compare SLNT, SLT, SAMIA-A and SAMIA");
  common(ev);
  auto* all = app.add_subcommand("run", "every step from corpus generation to evaluation");
  common(all);
  all->add_option("--n", o.n_sessions, "number of sessions");
  auto* ch = app.add_subcommand("chat", "talk to the agent on stdin");
  common(ch);
  ch->add_option("--checkpoint", o.checkpoint, "agent checkpoint (default <out>/samia.ckpt)");
  auto* dump = app.add_subcommand("dump-config", "print the effective configuration");
  common(dump);

  CLI11_PARSE(app, argc, argv);

  try {
    const Config config = make_config(o);
    const ArtifactPaths paths = make_paths(o);
    const Logger log = log_line;
    if (gen->parsed()) step_gen_corpus(config, paths, log);
    else if (vocab->parsed()) step_build_vocab(config, paths, log);
    else if (tuser->parsed()) step_train_user(config, paths, log);
    else if (tagent->parsed())
      step_train_agent(config, paths,
                       o.variant == "slnt" ? AgentVariant::Slnt
                       : o.variant == "slt" ? AgentVariant::Slt
                                            : AgentVariant::Both,
                       log);
    else if (rl->parsed()) step_rl_finetune(config, paths, log);
    else if (ev->parsed()) step_evaluate(config, paths, log);
    else if (all->parsed()) run_pipeline(config, paths, log);
    else if (ch->parsed()) return chat(config, paths, o.checkpoint);
    else if (dump->parsed()) std::cout << to_text(config);
  } catch (const MissingArtifact& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
