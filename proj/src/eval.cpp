#include "samia/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "samia/simulator.hpp"
#include "samia/user_model.hpp"

namespace samia {

namespace {
using json = nlohmann::json;

void check_gains(std::span<const double> gains) {
  for (double g : gains)
    if (!(g >= 0.0)) throw std::invalid_argument("dcg: gains must be non-negative");
}
}  // namespace

double dcg(std::span<const double> gains, int p) {
  if (p < 1) throw std::invalid_argument("dcg: p must be >= 1");
  check_gains(gains);
  const std::size_t n = std::min(gains.size(), static_cast<std::size_t>(p));
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += i == 0 ? gains[0] : gains[i] / std::log2(static_cast<double>(i + 1));
  return s;
}

double ndcg(std::span<const double> ranked, int p, std::span<const double> pool) {
  if (pool.empty()) pool = ranked;
  check_gains(pool);
  std::vector<double> ideal(pool.begin(), pool.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double best = dcg(ideal, p);
  if (best == 0.0) {
    check_gains(ranked);
    return 1.0;
  }
  return dcg(ranked, p) / best;
}

double perplexity(const Seq2SeqParams& params, std::span<const Example> examples) {
  return corpus_perplexity(params, examples);
}

std::string model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Slnt: return "SLNT";
    case ModelKind::Slt: return "SLT";
    case ModelKind::SamiaA: return "SAMIA-A";
    case ModelKind::Samia: return "SAMIA";
  }
  return "?";
}

std::vector<EvalItem> make_eval_items(const std::vector<Session>& sessions, const SlotSchema& schema) {
  std::vector<EvalItem> out;
  for (const auto& s : sessions) {
    for (std::size_t k = 1; k < s.turns.size(); ++k) {
      const auto& t = s.turns[k];
      if (t.role != Role::Agent || s.turns[k - 1].role != Role::User) continue;
      if (is_complete(t.tags_before, schema)) continue;
      out.push_back({{t.tags_before, s.turns[k - 1].text}, s.order, t.text});
    }
  }
  return out;
}

MetricStat summarize(std::vector<double> repeats) {
  MetricStat m;
  m.repeats = std::move(repeats);
  const double n = static_cast<double>(m.repeats.size());
  if (m.repeats.empty()) return m;
  for (double x : m.repeats) m.mean += x;
  m.mean /= n;
  if (m.repeats.size() > 1) {
    double ss = 0.0;
    for (double x : m.repeats) ss += (x - m.mean) * (x - m.mean);
    m.sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return m;
}

const ModelReport& Report::model(ModelKind kind) const {
  const auto name = model_name(kind);
  for (const auto& m : models)
    if (m.name == name) return m;
  throw std::out_of_range("report has no model " + name);
}

ExperimentResult run_experiment(const ModelSet& models, const Vocabulary& vocab, const SlotSchema& schema,
                                const Config& config, const std::vector<Session>& test, std::uint64_t seed,
                                const Logger& log) {
  ExperimentResult result;
  result.items = make_eval_items(test, schema);
  const auto& items = result.items;
  if (items.empty()) throw std::invalid_argument("run_experiment: no evaluation items in the test split");

  const Simulation sim{models.user, vocab, schema, config, &models.samia};
  const int beam = config.beam_width, max_len = config.max_len;

  result.outputs.assign(std::size(kAllModels), std::vector<ItemOutput>(items.size()));
  auto& out_slnt = result.outputs[0];
  auto& out_slt = result.outputs[1];
  auto& out_a = result.outputs[2];
  auto& out_s = result.outputs[3];
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& in = items[i].input;
    auto plain = [&](const Seq2SeqParams& p, bool tags, ItemOutput& o) {
      o.candidates = beam_candidates(p, encode_agent_input(in, vocab, schema, max_len, tags), vocab, beam, max_len);
      o.ranking.resize(o.candidates.size());
      for (std::size_t k = 0; k < o.ranking.size(); ++k) o.ranking[k] = k;
      o.chosen = 0;
    };
    plain(models.slnt, false, out_slnt[i]);
    plain(models.slt, true, out_slt[i]);
    RerankResult rr = rerank_infer(models.samia, sim, in);
    out_s[i].candidates = rr.candidates;
    out_s[i].ranking = rr.ranking;
    out_s[i].chosen = rr.chosen;
    out_a[i].candidates = std::move(rr.candidates);
    out_a[i].ranking.resize(out_a[i].candidates.size());
    for (std::size_t k = 0; k < out_a[i].ranking.size(); ++k) out_a[i].ranking[k] = k;
    out_a[i].chosen = 0;
    if (log && (i + 1) % 200 == 0) log("evaluated " + std::to_string(i + 1) + " / " + std::to_string(items.size()));
  }

  const int R = config.eval_repeats;
  const std::size_t M = std::size(kAllModels);
  std::vector<std::vector<double>> reward(M), n1(M), n3(M), n5(M);
  std::vector<double> truth;
  for (int r = 0; r < R; ++r) {
    std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(r) + 1);
    std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
    std::vector<std::size_t> sample(items.size());
    for (auto& s : sample) s = pick(rng);
    // the rule user's goal for each item this repeat: tags as stated, vacant slots redrawn
    std::vector<SlotState> goals(items.size());
    for (auto& g : goals) g = RuleUser::draw_goal(schema, rng);
    std::vector<double> rs(M, 0.0), s1(M, 0.0), s3(M, 0.0), s5(M, 0.0);
    double t_sum = 0.0;
    for (std::size_t idx : sample) {
      const auto& item = items[idx];
      const RuleUser user(schema, merge(goals[idx], item.input.tags));
      t_sum += criterion_reward(item.reference, item.input, user, schema);
      for (std::size_t m = 0; m < M; ++m) {
        const auto& o = result.outputs[m][idx];
        std::vector<double> gains(o.candidates.size()), ranked;
        for (std::size_t k = 0; k < gains.size(); ++k)
          gains[k] = criterion_reward(o.candidates[k].text, item.input, user, schema);
        for (std::size_t k : o.ranking) ranked.push_back(gains[k]);
        rs[m] += gains[o.chosen];
        const std::vector<double> ceiling(gains.size(), 1.0);
        const auto& ideal = config.ndcg_ideal == NdcgIdeal::MaxReward ? ceiling : gains;
        s1[m] += ndcg(ranked, 1, ideal);
        s3[m] += ndcg(ranked, 3, ideal);
        s5[m] += ndcg(ranked, 5, ideal);
      }
    }
    const double n = static_cast<double>(sample.size());
    for (std::size_t m = 0; m < M; ++m) {
      reward[m].push_back(rs[m] / n);
      n1[m].push_back(s1[m] / n);
      n3[m].push_back(s3[m] / n);
      n5[m].push_back(s5[m] / n);
    }
    truth.push_back(t_sum / n);
  }

  Report& rep = result.report;
  rep.seed = seed;
  rep.repeats = R;
  rep.items = items.size();
  rep.ground_truth = summarize(truth);
  rep.ndcg_ideal = config.ndcg_ideal;
  rep.user_test_ppl = perplexity(models.user, to_examples(extract_user_pairs(test), vocab, max_len));
  const auto agent_ex = extract_agent_examples(test);
  const auto ex_plain = to_examples(agent_ex, vocab, schema, max_len, false);
  const auto ex_tags = to_examples(agent_ex, vocab, schema, max_len, true);
  for (std::size_t m = 0; m < M; ++m) {
    ModelReport mr;
    mr.name = model_name(kAllModels[m]);
    mr.reward = summarize(reward[m]);
    mr.ndcg1 = summarize(n1[m]);
    mr.ndcg3 = summarize(n3[m]);
    mr.ndcg5 = summarize(n5[m]);
    switch (kAllModels[m]) {
      case ModelKind::Slnt: mr.test_ppl = perplexity(models.slnt, ex_plain); break;
      case ModelKind::Slt: mr.test_ppl = perplexity(models.slt, ex_tags); break;
      default: mr.test_ppl = perplexity(models.samia, ex_tags); break;
    }
    rep.models.push_back(std::move(mr));
  }
  return result;
}

namespace {

json stat_json(const MetricStat& m) { return {{"mean", m.mean}, {"stderr", m.sem}, {"repeats", m.repeats}}; }

std::string fmt(double x, int prec = 4) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(prec) << x;
  return o.str();
}

std::string cell(const MetricStat& m) { return fmt(m.mean) + " +- " + fmt(m.sem); }

std::string ndcg_note(NdcgIdeal ideal) {
  if (ideal == NdcgIdeal::MaxReward)
    return "nDCG uses the rule-user reward of each beam candidate as its gain and divides by the DCG of "
           "a list in which every candidate earns the maximum reward 1.";
  return "nDCG uses the rule-user reward of each beam candidate as its gain; the ideal ranking sorts all "
         "candidates of the item; an item whose candidates all have zero gain scores 1.";
}

}  // namespace

std::string report_json(const Report& r) {
  json models = json::array();
  for (const auto& m : r.models)
    models.push_back({{"name", m.name},
                      {"avg_reward", stat_json(m.reward)},
                      {"ndcg_1", stat_json(m.ndcg1)},
                      {"ndcg_3", stat_json(m.ndcg3)},
                      {"ndcg_5", stat_json(m.ndcg5)},
                      {"test_perplexity", m.test_ppl}});
  json j = {{"format", "samia-report"},
            {"version", 1},
            {"seed", r.seed},
            {"repeats", r.repeats},
            {"items", r.items},
            {"user_test_perplexity", r.user_test_ppl},
            {"ground_truth", {{"avg_reward", stat_json(r.ground_truth)}}},
            {"models", models},
            {"notes",
             {ndcg_note(r.ndcg_ideal),
              "Repeats resample the evaluation items with replacement and redraw the rule user's values "
              "for vacant slots; models are not retrained.",
              "ground_truth scores the reference agent turn of each item with the same rule user."}}};
  return j.dump(2) + "\n";
}

std::string report_text(const Report& r) {
  std::ostringstream o;
  o << "evaluation items: " << r.items << ", repeats: " << r.repeats << ", seed: " << r.seed << "\n";
  o << "user model test perplexity: " << fmt(r.user_test_ppl, 3) << "\n\n";
  o << std::left << std::setw(10) << "model" << std::setw(20) << "avg reward" << std::setw(20) << "nDCG_1"
    << std::setw(20) << "nDCG_3" << std::setw(20) << "nDCG_5" << "test ppl\n";
  for (const auto& m : r.models)
    o << std::left << std::setw(10) << m.name << std::setw(20) << cell(m.reward) << std::setw(20) << cell(m.ndcg1)
      << std::setw(20) << cell(m.ndcg3) << std::setw(20) << cell(m.ndcg5) << fmt(m.test_ppl, 3) << "\n";
  o << std::left << std::setw(10) << "reference" << std::setw(20) << cell(r.ground_truth) << "\n\n";
  o << "values are mean +- standard error over repeats.\n";
  o << ndcg_note(r.ndcg_ideal) << "\n";
  return o.str();
}

std::string plot_tsv(const Report& r) {
  std::ostringstream o;
  o << "model\tmetric\tmean\tstderr\n";
  auto row = [&](const std::string& model, const std::string& metric, const MetricStat& m) {
    o << model << '\t' << metric << '\t' << fmt(m.mean, 6) << '\t' << fmt(m.sem, 6) << '\n';
  };
  for (const auto& m : r.models) {
    row(m.name, "avg_reward", m.reward);
    row(m.name, "ndcg_1", m.ndcg1);
    row(m.name, "ndcg_3", m.ndcg3);
    row(m.name, "ndcg_5", m.ndcg5);
  }
  row("reference", "avg_reward", r.ground_truth);
  return o.str();
}

void write_reports(const std::filesystem::path& dir, const ExperimentResult& result) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << text;
  };
  write("report.json", report_json(result.report));
  write("report.txt", report_text(result.report));
  write("plot.tsv", plot_tsv(result.report));

  std::ofstream log(dir / "rerank_log.jsonl", std::ios::binary | std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + (dir / "rerank_log.jsonl").string());
  const auto& samia = result.outputs[3];
  for (std::size_t i = 0; i < samia.size(); ++i) {
    json cands = json::array();
    for (const auto& c : samia[i].candidates) {
      json e = {{"text", join_tokens(c.text)}, {"score", c.score}};
      e["reward"] = c.reward ? json(*c.reward) : json(nullptr);
      if (c.reward) e["user_reply"] = join_tokens(c.user_reply);
      cands.push_back(e);
    }
    log << json{{"item", i},
                {"tags", result.items[i].input.tags},
                {"user_text", join_tokens(result.items[i].input.user_text)},
                {"candidates", cands},
                {"chosen", samia[i].chosen}}
               .dump()
        << '\n';
  }
}

}  // namespace samia
