#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "samia/config.hpp"
#include "samia/eval.hpp"
#include "samia/trainer.hpp"

namespace samia {

/// Raised when a step needs an artifact an earlier step should have produced.
class MissingArtifact : public std::runtime_error {
 public:
  explicit MissingArtifact(const std::filesystem::path& path)
      : std::runtime_error("missing " + path.string()), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// File layout of one pipeline run.
struct ArtifactPaths {
  std::filesystem::path dir;
  std::filesystem::path corpus_override;  // empty: dir / corpus.jsonl

  std::filesystem::path corpus() const { return corpus_override.empty() ? dir / "corpus.jsonl" : corpus_override; }
  std::filesystem::path schema() const { return dir / "schema.json"; }
  std::filesystem::path vocab() const { return dir / "vocab.txt"; }
  std::filesystem::path user() const { return dir / "user.ckpt"; }
  std::filesystem::path slnt() const { return dir / "slnt.ckpt"; }
  std::filesystem::path slt() const { return dir / "slt.ckpt"; }
  std::filesystem::path samia() const { return dir / "samia.ckpt"; }
  std::filesystem::path reports() const { return dir / "reports"; }
};

/// Seeds of the individual stages, derived from config.seed.
struct StageSeeds {
  std::uint64_t corpus, split, user, slnt, slt, rl, eval;
  static StageSeeds from(std::uint64_t seed);
};

void require_file(const std::filesystem::path& path);

void step_gen_corpus(const Config& config, const ArtifactPaths& paths, const Logger& log = {});
void step_build_vocab(const Config& config, const ArtifactPaths& paths, const Logger& log = {});
void step_train_user(const Config& config, const ArtifactPaths& paths, const Logger& log = {});

enum class AgentVariant { Slnt, Slt, Both };
void step_train_agent(const Config& config, const ArtifactPaths& paths, AgentVariant variant,
                      const Logger& log = {});
void step_rl_finetune(const Config& config, const ArtifactPaths& paths, const Logger& log = {});
ExperimentResult step_evaluate(const Config& config, const ArtifactPaths& paths, const Logger& log = {});

/// Every step in order.
ExperimentResult run_pipeline(const Config& config, const ArtifactPaths& paths, const Logger& log = {});

}  // namespace samia
