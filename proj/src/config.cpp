#include "samia/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace samia {

namespace {

// shortest text that reads back to the same double
std::string shortest(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "invalid number '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key, "expected true/false, got '" + value + "'");
}

}  // namespace

void set_config_value(Config& c, const std::string& key, const std::string& v) {
  auto i = [&] { return parse_number<int>(key, v); };
  auto d = [&] { return parse_number<double>(key, v); };
  if (key == "config_version") c.config_version = i();
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "n_sessions") c.n_sessions = i();
  else if (key == "train_ratio") c.train_ratio = d();
  else if (key == "validation_ratio") c.validation_ratio = d();
  else if (key == "test_ratio") c.test_ratio = d();
  else if (key == "max_volunteered") c.generator.max_volunteered = i();
  else if (key == "two_slot_question") c.generator.two_slot_question = d();
  else if (key == "quick_question") c.generator.quick_question = d();
  else if (key == "clarify") c.generator.clarify = d();
  else if (key == "thanks") c.generator.thanks = d();
  else if (key == "mirror") c.generator.mirror = d();
  else if (key == "min_freq") c.min_freq = i();
  else if (key == "d_hidden") c.d_hidden = i();
  else if (key == "d_emb") c.d_emb = i();
  else if (key == "max_len") c.max_len = i();
  else if (key == "init_scale") c.init_scale = d();
  else if (key == "learning_rate") c.learning_rate = d();
  else if (key == "lr_decay") c.lr_decay = d();
  else if (key == "clip_norm") c.clip_norm = d();
  else if (key == "batch_size") c.batch_size = i();
  else if (key == "max_epochs") c.max_epochs = i();
  else if (key == "patience") c.patience = i();
  else if (key == "beam_width") c.beam_width = i();
  else if (key == "rerank_top") c.rerank_top = i();
  else if (key == "user_beam_width") c.user_beam_width = i();
  else if (key == "reward_baseline") c.reward_baseline = d();
  else if (key == "user_reply_selection") {
    if (v == "indicator_best") c.user_reply_selection = ReplySelection::IndicatorBest;
    else if (v == "top1") c.user_reply_selection = ReplySelection::Top1;
    else throw ConfigError(key, "expected indicator_best or top1, got '" + v + "'");
  } else if (key == "ndcg_ideal") {
    if (v == "max_reward") c.ndcg_ideal = NdcgIdeal::MaxReward;
    else if (v == "candidates") c.ndcg_ideal = NdcgIdeal::Candidates;
    else throw ConfigError(key, "expected max_reward or candidates, got '" + v + "'");
  } else if (key == "rl_samples") c.rl_samples = i();
  else if (key == "sim_turns") c.sim_turns = i();
  else if (key == "sl_rl_ratio") {
    const auto colon = v.find(':');
    if (colon == std::string::npos) throw ConfigError(key, "expected SL:RL, got '" + v + "'");
    c.sl_steps = parse_number<int>(key, trim(v.substr(0, colon)));
    c.rl_steps = parse_number<int>(key, trim(v.substr(colon + 1)));
  } else if (key == "fluency_gate") c.fluency_gate = d();
  else if (key == "rl_learning_rate") c.rl_learning_rate = d();
  else if (key == "rl_batch_size") c.rl_batch_size = i();
  else if (key == "joint_epochs") c.joint_epochs = i();
  else if (key == "eval_repeats") c.eval_repeats = i();
  else if (key == "eval_retrain") c.eval_retrain = parse_bool(key, v);
  else throw ConfigError(key, "unknown key");
}

void Config::validate() const {
  auto req = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, what);
  };
  req(config_version == 1, "config_version", "unsupported version");
  req(n_sessions >= 3, "n_sessions", "must be >= 3");
  req(min_freq >= 1, "min_freq", "must be >= 1");
  req(d_hidden >= 1, "d_hidden", "must be >= 1");
  req(d_emb >= 1, "d_emb", "must be >= 1");
  req(max_len >= 2, "max_len", "must be >= 2");
  req(learning_rate > 0, "learning_rate", "must be > 0");
  req(lr_decay > 0 && lr_decay <= 1, "lr_decay", "must be in (0, 1]");
  req(rl_learning_rate > 0, "rl_learning_rate", "must be > 0");
  req(batch_size >= 1, "batch_size", "must be >= 1");
  req(rl_batch_size >= 1, "rl_batch_size", "must be >= 1");
  req(max_epochs >= 1, "max_epochs", "must be >= 1");
  req(patience >= 1, "patience", "must be >= 1");
  req(beam_width >= 1, "beam_width", "must be >= 1");
  req(rerank_top >= 1 && rerank_top <= beam_width, "rerank_top", "must be in [1, beam_width]");
  req(user_beam_width >= 1, "user_beam_width", "must be >= 1");
  req(rl_samples >= 1, "rl_samples", "must be >= 1");
  req(sim_turns >= 1, "sim_turns", "must be >= 1");
  req(sl_steps >= 0 && rl_steps >= 0 && sl_steps + rl_steps > 0, "sl_rl_ratio",
      "needs non-negative parts, not both zero");
  req(fluency_gate > 0, "fluency_gate", "must be > 0");
  req(joint_epochs >= 0, "joint_epochs", "must be >= 0");
  req(eval_repeats >= 2, "eval_repeats", "must be >= 2");
}

Config parse_config(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected 'key = value'");
    set_config_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  c.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_text(const Config& c) {
  std::ostringstream o;
  o << "config_version = " << c.config_version << '\n'
    << "seed = " << c.seed << '\n'
    << "\n# corpus\n"
    << "n_sessions = " << c.n_sessions << '\n'
    << "train_ratio = " << shortest(c.train_ratio) << "  # reference dataset: 80/10/10\n"
    << "validation_ratio = " << shortest(c.validation_ratio) << '\n'
    << "test_ratio = " << shortest(c.test_ratio) << '\n'
    << "max_volunteered = " << c.generator.max_volunteered << '\n'
    << "two_slot_question = " << shortest(c.generator.two_slot_question) << '\n'
    << "quick_question = " << shortest(c.generator.quick_question) << '\n'
    << "clarify = " << shortest(c.generator.clarify) << '\n'
    << "thanks = " << shortest(c.generator.thanks) << '\n'
    << "mirror = " << shortest(c.generator.mirror) << '\n'
    << "min_freq = " << c.min_freq << '\n'
    << "\n# network\n"
    << "d_hidden = " << c.d_hidden << "  # reference system: 1024\n"
    << "d_emb = " << c.d_emb << "  # reference system: 256\n"
    << "max_len = " << c.max_len << "  # reference system: 50\n"
    << "init_scale = " << shortest(c.init_scale) << '\n'
    << "\n# supervised training (plain SGD with norm clipping)\n"
    << "learning_rate = " << shortest(c.learning_rate) << '\n'
    << "lr_decay = " << shortest(c.lr_decay) << '\n'
    << "clip_norm = " << shortest(c.clip_norm) << '\n'
    << "batch_size = " << c.batch_size << '\n'
    << "max_epochs = " << c.max_epochs << '\n'
    << "patience = " << c.patience << '\n'
    << "\n# simulation, reinforcement learning, reranking\n"
    << "beam_width = " << c.beam_width << "  # reference system: 20\n"
    << "rerank_top = " << c.rerank_top << "  # reference system: 5\n"
    << "user_beam_width = " << c.user_beam_width << "  # reference system: 20\n"
    << "reward_baseline = " << shortest(c.reward_baseline) << "  # reference system: 0\n"
    << "user_reply_selection = "
    << (c.user_reply_selection == ReplySelection::IndicatorBest ? "indicator_best" : "top1") << '\n'
    << "rl_samples = " << c.rl_samples << "  # reference system: 1\n"
    << "sim_turns = " << c.sim_turns << "  # reference system: 1\n"
    << "sl_rl_ratio = " << c.sl_steps << ':' << c.rl_steps << '\n'
    << "fluency_gate = " << shortest(c.fluency_gate) << '\n'
    << "rl_learning_rate = " << shortest(c.rl_learning_rate) << '\n'
    << "rl_batch_size = " << c.rl_batch_size << '\n'
    << "joint_epochs = " << c.joint_epochs << '\n'
    << "\n# evaluation\n"
    << "eval_repeats = " << c.eval_repeats << "  # reference system: 5\n"
    << "eval_retrain = " << (c.eval_retrain ? "true" : "false") << '\n'
    << "ndcg_ideal = " << (c.ndcg_ideal == NdcgIdeal::MaxReward ? "max_reward" : "candidates") << '\n';
  return o.str();
}

}  // namespace samia
