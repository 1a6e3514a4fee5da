#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "samia/agent_model.hpp"
#include "samia/config.hpp"
#include "samia/corpus.hpp"
#include "samia/seq2seq.hpp"
#include "samia/text.hpp"
#include "samia/trainer.hpp"

namespace samia {

/// DCG_p = g_1 + sum_{i=2..p} g_i / log2(i). p larger than the list uses the whole list.
double dcg(std::span<const double> gains, int p);

/// DCG_p(ranked) / DCG_p(pool sorted descending); `pool` defaults to `ranked`.
/// Defined as 1 when the ideal DCG is zero.
double ndcg(std::span<const double> ranked, int p, std::span<const double> pool = {});

double perplexity(const Seq2SeqParams& params, std::span<const Example> examples);

enum class ModelKind { Slnt, Slt, SamiaA, Samia };
std::string model_name(ModelKind kind);
inline constexpr ModelKind kAllModels[] = {ModelKind::Slnt, ModelKind::Slt, ModelKind::SamiaA, ModelKind::Samia};

/// One held-out agent turn with at least one vacant slot.
struct EvalItem {
  AgentInput input;
  SlotState goal;    // the session's order
  Tokens reference;  // what the corpus agent said
};

std::vector<EvalItem> make_eval_items(const std::vector<Session>& sessions, const SlotSchema& schema);

struct MetricStat {
  double mean = 0.0;
  double sem = 0.0;  // standard error of the mean over repeats
  std::vector<double> repeats;
};

MetricStat summarize(std::vector<double> repeats);

struct ModelReport {
  std::string name;
  MetricStat reward;
  MetricStat ndcg1, ndcg3, ndcg5;
  double test_ppl = 0.0;
};

struct Report {
  std::uint64_t seed = 0;
  int repeats = 0;
  std::size_t items = 0;
  double user_test_ppl = 0.0;
  MetricStat ground_truth;
  NdcgIdeal ndcg_ideal = NdcgIdeal::MaxReward;
  std::vector<ModelReport> models;  // SLNT, SLT, SAMIA-A, SAMIA

  const ModelReport& model(ModelKind kind) const;
};

struct ModelSet {
  const Seq2SeqParams& user;
  const Seq2SeqParams& slnt;
  const Seq2SeqParams& slt;
  const Seq2SeqParams& samia;
};

/// Per item and model: the beam candidates, their order as presented, and the
/// designated response.
struct ItemOutput {
  std::vector<ScoredCandidate> candidates;
  std::vector<std::size_t> ranking;
  std::size_t chosen = 0;
};

struct ExperimentResult {
  Report report;
  std::vector<EvalItem> items;
  std::vector<std::vector<ItemOutput>> outputs;  // [model][item], model in kAllModels order
};

/// Four-model comparison on the test split. Repeats resample the items with
/// replacement and redraw the rule user's values for vacant slots.
ExperimentResult run_experiment(const ModelSet& models, const Vocabulary& vocab, const SlotSchema& schema,
                                const Config& config, const std::vector<Session>& test, std::uint64_t seed,
                                const Logger& log = {});

std::string report_json(const Report& report);
std::string report_text(const Report& report);
std::string plot_tsv(const Report& report);

/// report.json, report.txt, plot.tsv and rerank_log.jsonl in `dir`.
void write_reports(const std::filesystem::path& dir, const ExperimentResult& result);

}  // namespace samia
