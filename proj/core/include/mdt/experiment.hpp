#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mdt/config.hpp"
#include "mdt/corpus.hpp"
#include "mdt/frontend.hpp"
#include "mdt/hmm_train.hpp"
#include "mdt/mask.hpp"
#include "mdt/mask_features.hpp"
#include "mdt/report.hpp"
#include "mdt/svm.hpp"

namespace mdt {

enum class Stage {
  kGenCorpus,
  kFeatures,
  kTrainHmm,
  kOracleMasks,
  kAlign,
  kTrainEstimators,
  kDecode,
  kEvaluate,
  kReport,
};

constexpr int kNumStages = 9;
Stage parse_stage(const std::string& subcommand);
std::string stage_name(Stage stage);

// Orchestrates the staged pipeline under out_dir. Each stage writes its
// artifacts plus a stamp chaining the relevant config sections, the master
// seed and the upstream stamps; a stage whose stamp already matches is
// skipped, which makes `run-all` resumable and re-runs cheap.
class Experiment {
 public:
  Experiment(Config cfg, std::optional<std::uint64_t> seed_override = {},
             std::optional<unsigned> jobs_override = {},
             std::optional<std::string> out_dir_override = {});

  // true when the stage did work, false when it was up to date
  bool run_stage(Stage stage);
  void run_all();

  const std::filesystem::path& out_dir() const { return out_; }
  std::uint64_t seed() const { return seed_; }
  unsigned jobs() const { return jobs_; }

  // parsed sub-configs (exposed for tests and tools)
  const CorpusConfig& corpus_config() const { return corpus_cfg_; }
  const FrontendConfig& frontend_config() const { return frontend_cfg_; }
  const Lexicon& lexicon() const { return lexicon_; }
  const std::vector<Method>& methods() const { return methods_; }

  ExperimentReport load_report_data() const;  // from eval.tsv

  std::filesystem::path report_txt_path() const;
  std::filesystem::path manifest_path() const;

 private:
  std::string expected_stamp(Stage stage) const;
  bool stage_up_to_date(Stage stage) const;
  void require_stage(Stage stage, const char* needed_for) const;
  void write_stamp(Stage stage);
  bool key_outputs_exist(Stage stage) const;

  void do_gen_corpus();
  void do_features();
  void do_train_hmm();
  void do_oracle_masks();
  void do_align();
  void do_train_estimators();
  void do_decode();
  void do_evaluate();
  void do_report();

  std::filesystem::path align_path(const ManifestEntry& e) const;
  std::vector<int> word_ids(const ManifestEntry& e) const;
  Matrix load_obs(const std::string& id_stem) const;

  Config cfg_;
  std::filesystem::path out_;
  std::uint64_t seed_ = 1;
  unsigned jobs_ = 0;
  CorpusConfig corpus_cfg_;
  FrontendConfig frontend_cfg_;
  DeltaConfig delta_cfg_;
  MaskFeatureConfig feature_cfg_;
  SvmTrainConfig svm_cfg_;
  HmmTrainConfig hmm_cfg_;
  OracleThreshold oracle_thr_;
  DeltaMaskRule delta_rule_ = DeltaMaskRule::kAnd;
  bool bounded_deltas_ = false;
  bool align_on_clean_ = true;
  std::vector<Method> methods_;
  Lexicon lexicon_;
};

}  // namespace mdt
