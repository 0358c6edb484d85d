#include "mdt/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mdt/estimator_bank.hpp"
#include "mdt/eval.hpp"
#include "mdt/io_util.hpp"
#include "mdt/parallel.hpp"
#include "mdt/rng.hpp"

namespace mdt {

namespace {

const char* kStageNames[kNumStages] = {
    "gen-corpus", "features",         "train-hmm",
    "oracle-masks", "align",          "train-estimators",
    "decode",     "evaluate",         "report"};

}  // namespace

Stage parse_stage(const std::string& subcommand) {
  for (int i = 0; i < kNumStages; ++i) {
    if (subcommand == kStageNames[i]) return static_cast<Stage>(i);
  }
  throw std::invalid_argument("unknown stage `" + subcommand + "`");
}

std::string stage_name(Stage stage) {
  return kStageNames[static_cast<int>(stage)];
}

Experiment::Experiment(Config cfg, std::optional<std::uint64_t> seed_override,
                       std::optional<unsigned> jobs_override,
                       std::optional<std::string> out_dir_override) {
  // a standalone (flat) corpus config file may be referenced instead of an
  // inline [corpus] section
  if (cfg.has("experiment", "corpus_config")) {
    const std::string path = cfg.get_string("experiment", "corpus_config", "");
    Config flat = Config::parse_file(path);
    cfg.adopt_section(flat, "", "corpus");
    cfg.adopt_section(flat, "corpus", "corpus");
  }
  cfg_ = cfg;

  cfg_.validate_keys("experiment",
                     {"out_dir", "seed", "jobs", "methods", "corpus_config"});
  cfg_.validate_keys("frontend",
                     {"frame_len", "frame_shift", "preemphasis", "n_mel",
                      "f_min", "f_max", "energy_floor", "delta_window"});
  cfg_.validate_keys("mask", {"theta_db", "delta_rule"});
  cfg_.validate_keys(
      "hmm", {"states_per_word", "sil_states", "mixtures", "kmeans_passes",
              "em_passes", "var_floor_frac", "min_word_count",
              "self_loop_init", "bounded_deltas", "align_on"});
  cfg_.validate_keys(
      "svm", {"lambda", "epochs", "eta0", "min_samples_per_model",
              "noise_floor_window", "noise_floor_bias", "flatness_half_width",
              "f0_min_hz", "f0_max_hz", "voicing_threshold"});

  out_ = out_dir_override.value_or(
      cfg_.get_string("experiment", "out_dir", "out"));
  seed_ = seed_override.value_or(cfg_.get_u64("experiment", "seed", 1));
  jobs_ = jobs_override.value_or(
      static_cast<unsigned>(cfg_.get_int("experiment", "jobs", 0)));

  methods_.clear();
  for (const auto& name :
       cfg_.get_list("experiment", "methods",
                     "classical_oracle,state_dependent_oracle")) {
    methods_.push_back(parse_method(name));
  }
  if (methods_.empty()) {
    throw std::invalid_argument("methods list must be non-empty");
  }

  corpus_cfg_ = CorpusConfig::from_config(cfg_, "corpus");

  frontend_cfg_.frame_len =
      static_cast<int>(cfg_.get_int("frontend", "frame_len", 200));
  frontend_cfg_.frame_shift =
      static_cast<int>(cfg_.get_int("frontend", "frame_shift", 80));
  frontend_cfg_.preemphasis = cfg_.get_double("frontend", "preemphasis", 0.97);
  frontend_cfg_.n_mel = static_cast<int>(cfg_.get_int("frontend", "n_mel", 23));
  frontend_cfg_.f_min = cfg_.get_double("frontend", "f_min", 64.0);
  frontend_cfg_.f_max = cfg_.get_double("frontend", "f_max", 4000.0);
  frontend_cfg_.energy_floor =
      cfg_.get_double("frontend", "energy_floor", 1e-10);
  delta_cfg_.half_width =
      static_cast<int>(cfg_.get_int("frontend", "delta_window", 2));
  frontend_cfg_.validate(corpus_cfg_.synth.sample_rate);

  // the synthesizer plans utterances in frontend frame units
  corpus_cfg_.synth.frame_shift = frontend_cfg_.frame_shift;
  corpus_cfg_.synth.frame_len = frontend_cfg_.frame_len;
  corpus_cfg_.validate();

  oracle_thr_.theta_db = cfg_.get_double("mask", "theta_db", 0.0);
  const std::string rule = cfg_.get_string("mask", "delta_rule", "and");
  if (rule == "and") {
    delta_rule_ = DeltaMaskRule::kAnd;
  } else if (rule == "or") {
    delta_rule_ = DeltaMaskRule::kOr;
  } else {
    throw std::invalid_argument("mask delta_rule must be `and` or `or`");
  }

  hmm_cfg_.states_per_word =
      static_cast<int>(cfg_.get_int("hmm", "states_per_word", 8));
  hmm_cfg_.sil_states = static_cast<int>(cfg_.get_int("hmm", "sil_states", 3));
  hmm_cfg_.mixtures = static_cast<int>(cfg_.get_int("hmm", "mixtures", 3));
  hmm_cfg_.kmeans_passes =
      static_cast<int>(cfg_.get_int("hmm", "kmeans_passes", 6));
  hmm_cfg_.em_passes = static_cast<int>(cfg_.get_int("hmm", "em_passes", 2));
  hmm_cfg_.var_floor_frac = cfg_.get_double("hmm", "var_floor_frac", 1e-3);
  hmm_cfg_.min_word_count =
      static_cast<int>(cfg_.get_int("hmm", "min_word_count", 1));
  hmm_cfg_.self_loop_init = cfg_.get_double("hmm", "self_loop_init", 0.6);
  bounded_deltas_ = cfg_.get_bool("hmm", "bounded_deltas", false);
  const std::string align_on = cfg_.get_string("hmm", "align_on", "clean");
  if (align_on == "clean") {
    align_on_clean_ = true;
  } else if (align_on == "noisy") {
    align_on_clean_ = false;
  } else {
    throw std::invalid_argument("hmm align_on must be `clean` or `noisy`");
  }

  svm_cfg_.lambda = cfg_.get_double("svm", "lambda", 7e-3);
  svm_cfg_.epochs = static_cast<int>(cfg_.get_int("svm", "epochs", 12));
  svm_cfg_.eta0 = cfg_.get_double("svm", "eta0", 1.0);
  svm_cfg_.min_samples_per_model =
      static_cast<int>(cfg_.get_int("svm", "min_samples_per_model", 20));
  feature_cfg_.noise_floor_window =
      static_cast<int>(cfg_.get_int("svm", "noise_floor_window", 40));
  feature_cfg_.noise_floor_bias =
      cfg_.get_double("svm", "noise_floor_bias", 1.5);
  feature_cfg_.flatness_half_width =
      static_cast<int>(cfg_.get_int("svm", "flatness_half_width", 5));
  feature_cfg_.f0_min_hz = cfg_.get_double("svm", "f0_min_hz", 60.0);
  feature_cfg_.f0_max_hz = cfg_.get_double("svm", "f0_max_hz", 400.0);
  feature_cfg_.voicing_threshold =
      cfg_.get_double("svm", "voicing_threshold", 0.3);

  lexicon_ = Lexicon::builtin(corpus_cfg_.n_words);
}

// ------------------------------------------------------------------ paths

std::filesystem::path Experiment::manifest_path() const {
  return out_ / "corpus" / "manifest.tsv";
}

std::filesystem::path Experiment::report_txt_path() const {
  return out_ / "report" / "report.txt";
}

std::filesystem::path Experiment::align_path(const ManifestEntry& e) const {
  const std::string stem = align_on_clean_ ? e.base_id() : e.id;
  return out_ / "align" / (stem + ".ali");
}

std::vector<int> Experiment::word_ids(const ManifestEntry& e) const {
  std::vector<int> ids;
  for (const auto& w : e.words) {
    const int id = lexicon_.find(w);
    if (id < 0) {
      throw std::runtime_error("manifest word `" + w + "` not in lexicon");
    }
    ids.push_back(id);
  }
  return ids;
}

Matrix Experiment::load_obs(const std::string& id_stem) const {
  SpectroTemporal statics =
      read_stfm(out_ / "features" / (id_stem + ".static.stfm"));
  SpectroTemporal deltas =
      read_stfm(out_ / "features" / (id_stem + ".delta.stfm"));
  return stack_observations(statics, deltas);
}

// ----------------------------------------------------------------- stamps

std::string Experiment::expected_stamp(Stage stage) const {
  std::ostringstream os;
  os << stage_name(stage) << "|v1|seed=" << seed_ << "|";
  switch (stage) {
    case Stage::kGenCorpus:
      os << cfg_.section_text("corpus") << cfg_.section_text("frontend");
      break;
    case Stage::kFeatures:
      os << cfg_.section_text("frontend") << "svmfeat:"
         << feature_cfg_.noise_floor_window << ","
         << feature_cfg_.noise_floor_bias << ","
         << feature_cfg_.flatness_half_width << "," << feature_cfg_.f0_min_hz
         << "," << feature_cfg_.f0_max_hz << ","
         << feature_cfg_.voicing_threshold << "|"
         << expected_stamp(Stage::kGenCorpus);
      break;
    case Stage::kTrainHmm:
      os << cfg_.section_text("hmm") << expected_stamp(Stage::kFeatures);
      break;
    case Stage::kOracleMasks:
      os << cfg_.section_text("mask") << expected_stamp(Stage::kFeatures);
      break;
    case Stage::kAlign:
      os << (align_on_clean_ ? "clean" : "noisy") << "|"
         << expected_stamp(Stage::kTrainHmm);
      break;
    case Stage::kTrainEstimators:
      os << cfg_.section_text("svm") << expected_stamp(Stage::kAlign)
         << expected_stamp(Stage::kOracleMasks);
      break;
    case Stage::kDecode: {
      os << "methods=";
      for (Method m : methods_) os << method_name(m) << ",";
      os << "|" << expected_stamp(Stage::kTrainHmm)
         << expected_stamp(Stage::kOracleMasks)
         << expected_stamp(Stage::kAlign);
      const bool needs_bank =
          std::any_of(methods_.begin(), methods_.end(), [](Method m) {
            return m != Method::kClassicalOracle;
          });
      if (needs_bank) os << expected_stamp(Stage::kTrainEstimators);
      break;
    }
    case Stage::kEvaluate:
      os << expected_stamp(Stage::kDecode);
      break;
    case Stage::kReport:
      os << expected_stamp(Stage::kEvaluate);
      break;
  }
  return hex64(fnv1a64(os.str()));
}

bool Experiment::key_outputs_exist(Stage stage) const {
  namespace fs = std::filesystem;
  switch (stage) {
    case Stage::kGenCorpus: return fs::exists(manifest_path());
    case Stage::kFeatures: return fs::exists(out_ / "features");
    case Stage::kTrainHmm: return fs::exists(out_ / "models" / "hmm.bin");
    case Stage::kOracleMasks: return fs::exists(out_ / "masks");
    case Stage::kAlign: return fs::exists(out_ / "align");
    case Stage::kTrainEstimators:
      return fs::exists(out_ / "models" / "bank.svmb");
    case Stage::kDecode: return fs::exists(out_ / "decode");
    case Stage::kEvaluate: return fs::exists(out_ / "eval" / "eval.tsv");
    case Stage::kReport: return fs::exists(report_txt_path());
  }
  return false;
}

bool Experiment::stage_up_to_date(Stage stage) const {
  const auto stamp_file = out_ / "stamps" / stage_name(stage);
  if (!std::filesystem::exists(stamp_file)) return false;
  if (!key_outputs_exist(stage)) return false;
  return read_text_file(stamp_file) == expected_stamp(stage);
}

void Experiment::require_stage(Stage stage, const char* needed_for) const {
  if (stage_up_to_date(stage)) return;
  std::string missing;
  switch (stage) {
    case Stage::kGenCorpus: missing = "corpus/manifest.tsv"; break;
    case Stage::kFeatures: missing = "features/"; break;
    case Stage::kTrainHmm: missing = "models/hmm.bin"; break;
    case Stage::kOracleMasks: missing = "masks/"; break;
    case Stage::kAlign: missing = "align/"; break;
    case Stage::kTrainEstimators: missing = "models/bank.svmb"; break;
    case Stage::kDecode: missing = "decode/"; break;
    case Stage::kEvaluate: missing = "eval/eval.tsv"; break;
    case Stage::kReport: missing = "report/report.txt"; break;
  }
  throw std::invalid_argument(
      std::string(needed_for) + " needs artifact `" + missing +
      "` of stage `" + stage_name(stage) + "`; run that stage first");
}

void Experiment::write_stamp(Stage stage) {
  std::filesystem::create_directories(out_ / "stamps");
  write_text_file(out_ / "stamps" / stage_name(stage), expected_stamp(stage));
}

bool Experiment::run_stage(Stage stage) {
  if (stage_up_to_date(stage)) {
    std::cout << "[skip] " << stage_name(stage) << " (up to date)\n";
    return false;
  }
  const auto t0 = std::chrono::steady_clock::now();
  switch (stage) {
    case Stage::kGenCorpus: do_gen_corpus(); break;
    case Stage::kFeatures: do_features(); break;
    case Stage::kTrainHmm: do_train_hmm(); break;
    case Stage::kOracleMasks: do_oracle_masks(); break;
    case Stage::kAlign: do_align(); break;
    case Stage::kTrainEstimators: do_train_estimators(); break;
    case Stage::kDecode: do_decode(); break;
    case Stage::kEvaluate: do_evaluate(); break;
    case Stage::kReport: do_report(); break;
  }
  write_stamp(stage);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::cout << "[done] " << stage_name(stage) << " (" << secs << " s)\n";
  // wall times are diagnostics only; report files stay byte-deterministic
  std::ofstream timings(out_ / "timings.txt", std::ios::app);
  timings << stage_name(stage) << "\t" << secs << "\n";
  return true;
}

void Experiment::run_all() {
  for (int i = 0; i < kNumStages; ++i) {
    run_stage(static_cast<Stage>(i));
  }
}

// ----------------------------------------------------------------- stages

void Experiment::do_gen_corpus() {
  std::filesystem::create_directories(out_ / "corpus");
  generate_corpus(corpus_cfg_, lexicon_, seed_, out_ / "corpus", jobs_);
}

void Experiment::do_features() {
  require_stage(Stage::kGenCorpus, "features");
  const auto entries = read_manifest(manifest_path());
  std::filesystem::create_directories(out_ / "features");

  // clean features once per base utterance
  std::vector<std::pair<std::string, std::string>> bases;  // (base_id, path)
  {
    std::map<std::string, std::string> seen;
    for (const auto& e : entries) seen.emplace(e.base_id(), e.clean_path);
    bases.assign(seen.begin(), seen.end());
  }
  const int sr = corpus_cfg_.synth.sample_rate;
  parallel_for(bases.size(), jobs_, [&](std::size_t i) {
    const auto& [base_id, clean_rel] = bases[i];
    Waveform clean = read_raw_audio(out_ / "corpus" / clean_rel, sr);
    SpectroTemporal log_st = log_mel_spectrogram(clean, frontend_cfg_);
    SpectroTemporal delta = delta_coefficients(log_st, delta_cfg_);
    SpectroTemporal lin = linear_mel_spectrogram(clean, frontend_cfg_);
    write_stfm(out_ / "features" / (base_id + ".clean.static.stfm"), log_st);
    write_stfm(out_ / "features" / (base_id + ".clean.delta.stfm"), delta);
    write_stfm(out_ / "features" / (base_id + ".cleanlin.stfm"), lin);
  });

  parallel_for(entries.size(), jobs_, [&](std::size_t i) {
    const ManifestEntry& e = entries[i];
    Waveform noisy = read_raw_audio(out_ / "corpus" / e.noisy_path, sr);
    Waveform noise = read_raw_audio(out_ / "corpus" / e.noise_path, sr);

    SpectroTemporal noisy_log = log_mel_spectrogram(noisy, frontend_cfg_);
    SpectroTemporal noisy_delta = delta_coefficients(noisy_log, delta_cfg_);
    SpectroTemporal noisy_lin = linear_mel_spectrogram(noisy, frontend_cfg_);
    SpectroTemporal noise_lin = linear_mel_spectrogram(noise, frontend_cfg_);

    write_stfm(out_ / "features" / (e.id + ".static.stfm"), noisy_log);
    write_stfm(out_ / "features" / (e.id + ".delta.stfm"), noisy_delta);
    write_stfm(out_ / "features" / (e.id + ".noiselin.stfm"), noise_lin);

    const auto floor = noise_floor_estimate(
        noisy_lin, feature_cfg_.noise_floor_window,
        feature_cfg_.noise_floor_bias);
    Matrix sub_snr = subband_snr_feature(noisy_lin, floor);
    Matrix flatness = flatness_feature(
        noisy_lin, feature_cfg_.flatness_half_width,
        frontend_cfg_.energy_floor);
    HarmonicDecomposition hd =
        harmonic_decomposition(noisy, frontend_cfg_, feature_cfg_);
    Matrix features =
        build_feature_matrix(sub_snr, flatness, hd.harmonic_log,
                             hd.random_log, noisy_log, noisy_delta);
    SpectroTemporal svm_st;
    svm_st.values = std::move(features);
    svm_st.domain = Domain::kFeature;
    svm_st.frame_shift = frontend_cfg_.frame_shift;
    svm_st.frame_len = frontend_cfg_.frame_len;
    svm_st.sample_rate = sr;
    write_stfm(out_ / "features" / (e.id + ".svm.stfm"), svm_st);
  });
}

void Experiment::do_train_hmm() {
  require_stage(Stage::kFeatures, "train-hmm");
  const auto entries = read_manifest(manifest_path());
  std::vector<const ManifestEntry*> train;
  for (const auto& e : entries) {
    if (e.split == "train") train.push_back(&e);
  }
  if (train.empty()) throw std::invalid_argument("train split is empty");

  std::vector<TrainUtterance> utts(train.size());
  parallel_for(train.size(), jobs_, [&](std::size_t i) {
    utts[i].words = word_ids(*train[i]);
    utts[i].obs = load_obs(train[i]->id);
  });

  std::vector<std::string> word_names;
  for (const auto& w : lexicon_.words) word_names.push_back(w.name);

  HmmTrainConfig cfg = hmm_cfg_;
  cfg.seed = derive_seed(seed_, SeedStream::kHmmKmeans, {});
  HmmTrainStats stats;
  HmmSet hmm = train_hmm(utts, word_names, frontend_cfg_.n_mel,
                         delta_cfg_.half_width, cfg, jobs_, &stats);
  std::filesystem::create_directories(out_ / "models");
  hmm.save(out_ / "models" / "hmm.bin");
  std::cout << "  trained " << hmm.topo.total_states() << " states on "
            << stats.total_frames << " frames\n";
}

void Experiment::do_oracle_masks() {
  require_stage(Stage::kFeatures, "oracle-masks");
  const auto entries = read_manifest(manifest_path());
  std::filesystem::create_directories(out_ / "masks");
  parallel_for(entries.size(), jobs_, [&](std::size_t i) {
    const ManifestEntry& e = entries[i];
    SpectroTemporal clean_lin =
        read_stfm(out_ / "features" / (e.base_id() + ".cleanlin.stfm"));
    SpectroTemporal noise_lin =
        read_stfm(out_ / "features" / (e.id + ".noiselin.stfm"));
    BinaryMask mask = oracle_mask(clean_lin, noise_lin, oracle_thr_);
    attach_delta(mask, delta_cfg_, delta_rule_);
    write_mask(out_ / "masks" / (e.id + ".mask"), mask);
  });
}

void Experiment::do_align() {
  require_stage(Stage::kTrainHmm, "align");
  const auto entries = read_manifest(manifest_path());
  const HmmSet hmm = HmmSet::load(out_ / "models" / "hmm.bin");
  std::filesystem::create_directories(out_ / "align");

  MarginalOptions mopt;
  mopt.n_static = static_cast<std::size_t>(frontend_cfg_.n_mel);
  mopt.bounded_deltas = bounded_deltas_;

  struct Task {
    std::string stem;       // feature stem to align on
    std::string out_stem;   // alignment file stem
    std::vector<int> words;
  };
  std::vector<Task> tasks;
  {
    std::map<std::string, Task> by_stem;
    for (const auto& e : entries) {
      Task t;
      if (align_on_clean_) {
        t.stem = e.base_id() + ".clean";
        t.out_stem = e.base_id();
      } else {
        t.stem = e.id;
        t.out_stem = e.id;
      }
      t.words = word_ids(e);
      by_stem.emplace(t.out_stem, std::move(t));
    }
    for (auto& [k, v] : by_stem) tasks.push_back(std::move(v));
  }

  parallel_for(tasks.size(), jobs_, [&](std::size_t i) {
    const Task& t = tasks[i];
    Matrix obs = load_obs(t.stem);
    BinaryMask all = all_reliable_mask(
        obs.rows(), static_cast<std::size_t>(frontend_cfg_.n_mel));
    std::vector<int> alignment = forced_align(hmm, obs, all, t.words, mopt);
    std::ostringstream os;
    for (std::size_t f = 0; f < alignment.size(); ++f) {
      os << f << '\t' << alignment[f] << '\n';
    }
    write_text_file(out_ / "align" / (t.out_stem + ".ali"), os.str());
  });
}

namespace {

std::vector<int> read_alignment(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw std::invalid_argument("alignment not found: " + path.string());
  }
  std::istringstream is(read_text_file(path));
  std::vector<int> alignment;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("malformed alignment file: " + path.string());
    }
    alignment.push_back(std::stoi(line.substr(tab + 1)));
  }
  return alignment;
}

}  // namespace

void Experiment::do_train_estimators() {
  require_stage(Stage::kOracleMasks, "train-estimators");
  require_stage(Stage::kAlign, "train-estimators");
  const auto entries = read_manifest(manifest_path());
  const HmmSet hmm = HmmSet::load(out_ / "models" / "hmm.bin");

  std::vector<const ManifestEntry*> train;
  for (const auto& e : entries) {
    if (e.split == "train") train.push_back(&e);
  }
  if (train.empty()) throw std::invalid_argument("train split is empty");

  std::vector<BankTrainEntry> bank_entries(train.size());
  parallel_for(train.size(), jobs_, [&](std::size_t i) {
    const ManifestEntry& e = *train[i];
    BankTrainEntry be;
    be.features = read_stfm(out_ / "features" / (e.id + ".svm.stfm")).values;
    BinaryMask mask = read_mask(out_ / "masks" / (e.id + ".mask"));
    be.labels = mask.statics;
    be.alignment = read_alignment(align_path(e));
    if (be.alignment.size() != be.features.rows() ||
        mask.T != be.features.rows()) {
      throw std::runtime_error("feature/mask/alignment length mismatch for " +
                               e.id);
    }
    bank_entries[i] = std::move(be);
  });

  SvmTrainConfig cfg = svm_cfg_;
  cfg.seed = derive_seed(seed_, SeedStream::kSvmModel, {});
  BankStats stats;
  EstimatorBank bank = train_estimator_bank(
      bank_entries, static_cast<std::size_t>(hmm.topo.total_states()),
      static_cast<std::size_t>(frontend_cfg_.n_mel), cfg, jobs_, &stats);
  std::filesystem::create_directories(out_ / "models");
  bank.save(out_ / "models" / "bank.svmb");
  std::cout << "  bank: " << bank.slot_count() << " slots (" << stats.trained
            << " trained, " << stats.constant << " constant, "
            << stats.fallback << " fallback)\n";
}

void Experiment::do_decode() {
  require_stage(Stage::kTrainHmm, "decode");
  require_stage(Stage::kOracleMasks, "decode");
  require_stage(Stage::kAlign, "decode");
  const bool needs_bank =
      std::any_of(methods_.begin(), methods_.end(), [](Method m) {
        return m != Method::kClassicalOracle;
      });
  if (needs_bank) require_stage(Stage::kTrainEstimators, "decode");

  const auto entries = read_manifest(manifest_path());
  const HmmSet hmm = HmmSet::load(out_ / "models" / "hmm.bin");
  EstimatorBank bank;
  if (needs_bank) bank = EstimatorBank::load(out_ / "models" / "bank.svmb");

  std::vector<const ManifestEntry*> test;
  for (const auto& e : entries) {
    if (e.split == "test") test.push_back(&e);
  }
  if (test.empty()) throw std::invalid_argument("test split is empty");

  const DecodeGraph graph = build_word_loop_graph(hmm);
  MarginalOptions mopt;
  mopt.n_static = static_cast<std::size_t>(frontend_cfg_.n_mel);
  mopt.bounded_deltas = bounded_deltas_;

  std::filesystem::create_directories(out_ / "decode");
  std::filesystem::create_directories(out_ / "masks_sd");

  for (Method method : methods_) {
    struct Row {
      std::string hyp_csv;
      std::size_t isolated = 0;
      std::uint64_t mask_evals = 0;
    };
    std::vector<Row> rows(test.size());
    parallel_for(test.size(), jobs_, [&](std::size_t i) {
      const ManifestEntry& e = *test[i];
      Matrix obs = load_obs(e.id);
      DecodeResult result;
      BinaryMask mask;
      if (method == Method::kClassicalOracle) {
        mask = read_mask(out_ / "masks" / (e.id + ".mask"));
        result = viterbi_decode(hmm, obs, mask, graph, mopt);
      } else if (method == Method::kStateDependentOracle) {
        Matrix features =
            read_stfm(out_ / "features" / (e.id + ".svm.stfm")).values;
        std::vector<int> alignment = read_alignment(align_path(e));
        mask = bank.predict_mask(features, alignment, delta_cfg_, delta_rule_);
        write_mask(out_ / "masks_sd" / (e.id + ".mask"), mask);
        result = viterbi_decode(hmm, obs, mask, graph, mopt);
      } else {
        Matrix features =
            read_stfm(out_ / "features" / (e.id + ".svm.stfm")).values;
        std::uint64_t evals = 0;
        result = decode_state_conditioned(hmm, obs, bank, features, graph,
                                          mopt, delta_rule_, &evals);
        rows[i].mask_evals = evals;
        // granularity diagnostic: the mask of the chosen state sequence
        mask = bank.predict_mask(features, result.alignment, delta_cfg_,
                                 delta_rule_);
      }
      rows[i].isolated = count_isolated_reliable(mask);
      std::ostringstream hyp;
      for (std::size_t wi = 0; wi < result.words.size(); ++wi) {
        if (wi) hyp << ',';
        hyp << lexicon_.words[static_cast<std::size_t>(result.words[wi])].name;
      }
      rows[i].hyp_csv = hyp.str();
    });

    std::ostringstream hyp_os, diag_os;
    for (std::size_t i = 0; i < test.size(); ++i) {
      hyp_os << test[i]->id << '\t' << rows[i].hyp_csv << '\n';
      diag_os << test[i]->id << '\t' << snr_to_string(test[i]->snr_db) << '\t'
              << test[i]->noise_kind << '\t' << rows[i].isolated << '\t'
              << rows[i].mask_evals << '\n';
    }
    write_text_file(out_ / "decode" / (method_name(method) + ".tsv"),
                    hyp_os.str());
    write_text_file(out_ / "decode" / ("diag_" + method_name(method) + ".tsv"),
                    diag_os.str());
  }
}

void Experiment::do_evaluate() {
  require_stage(Stage::kDecode, "evaluate");
  const auto entries = read_manifest(manifest_path());
  std::map<std::string, const ManifestEntry*> by_id;
  std::vector<const ManifestEntry*> test;
  for (const auto& e : entries) {
    if (e.split == "test") {
      test.push_back(&e);
      by_id[e.id] = &e;
    }
  }

  std::ostringstream out_rows;
  for (Method method : methods_) {
    std::map<std::string, std::string> hyps;
    {
      std::istringstream is(read_text_file(
          out_ / "decode" / (method_name(method) + ".tsv")));
      std::string line;
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        hyps[line.substr(0, tab)] =
            tab == std::string::npos ? "" : line.substr(tab + 1);
      }
    }
    std::map<std::string, std::size_t> isolated;
    {
      std::istringstream is(read_text_file(
          out_ / "decode" / ("diag_" + method_name(method) + ".tsv")));
      std::string line;
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string id, snr, noise, iso;
        std::getline(ls, id, '\t');
        std::getline(ls, snr, '\t');
        std::getline(ls, noise, '\t');
        std::getline(ls, iso, '\t');
        isolated[id] = static_cast<std::size_t>(std::stoull(iso));
      }
    }

    struct Agg {
      EditCounts counts;
      double isolated_sum = 0.0;
      std::uint64_t utts = 0;
    };
    std::map<std::pair<std::string, std::string>, Agg> agg;  // (snr, noise)
    for (const ManifestEntry* e : test) {
      auto it = hyps.find(e->id);
      if (it == hyps.end()) {
        throw std::runtime_error("missing hypothesis for " + e->id);
      }
      std::vector<std::string> hyp_words;
      std::istringstream ws(it->second);
      std::string w;
      while (std::getline(ws, w, ',')) {
        if (!w.empty()) hyp_words.push_back(w);
      }
      const EditCounts c = word_edit_counts(e->words, hyp_words);
      const std::string snr = snr_to_string(e->snr_db);
      for (const std::string noise_key : {std::string("all"), e->noise_kind}) {
        if (noise_key == "none") continue;  // clean entries pool into "all"
        Agg& a = agg[{snr, noise_key}];
        a.counts += c;
        a.isolated_sum += static_cast<double>(isolated[e->id]);
        ++a.utts;
      }
    }
    for (const auto& [key, a] : agg) {
      out_rows << method_name(method) << '\t' << key.first << '\t'
               << key.second << '\t' << a.counts.n_ref << '\t' << a.counts.sub
               << '\t' << a.counts.del << '\t' << a.counts.ins << '\t'
               << a.utts << '\t' << a.isolated_sum << '\n';
    }
  }
  std::filesystem::create_directories(out_ / "eval");
  write_text_file(out_ / "eval" / "eval.tsv", out_rows.str());
}

ExperimentReport Experiment::load_report_data() const {
  ExperimentReport report;
  report.methods = methods_;
  report.snrs_db = corpus_cfg_.test_snrs_db;
  report.n_mel = frontend_cfg_.n_mel;

  const HmmSet hmm = HmmSet::load(out_ / "models" / "hmm.bin");
  report.s_total = static_cast<std::size_t>(hmm.topo.total_states());

  const auto entries = read_manifest(manifest_path());
  for (const auto& e : entries) {
    if (e.split == "train") {
      ++report.train_entries;
    } else {
      ++report.test_entries;
    }
  }

  auto method_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < methods_.size(); ++i) {
      if (method_name(methods_[i]) == name) return static_cast<int>(i);
    }
    return -1;
  };
  auto snr_index = [&](const std::string& s) {
    const double v = parse_snr(s);
    for (std::size_t i = 0; i < report.snrs_db.size(); ++i) {
      const double r = report.snrs_db[i];
      if ((std::isinf(v) && std::isinf(r)) ||
          (std::isfinite(v) && std::isfinite(r) && std::fabs(v - r) < 1e-9)) {
        return static_cast<int>(i);
      }
    }
    return -1;
  };

  std::istringstream is(read_text_file(out_ / "eval" / "eval.tsv"));
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string method, snr, noise;
    std::uint64_t n_ref, sub, del, ins, utts;
    double isolated_sum;
    std::getline(ls, method, '\t');
    std::getline(ls, snr, '\t');
    std::getline(ls, noise, '\t');
    ls >> n_ref;
    ls.ignore();
    ls >> sub;
    ls.ignore();
    ls >> del;
    ls.ignore();
    ls >> ins;
    ls.ignore();
    ls >> utts;
    ls.ignore();
    ls >> isolated_sum;
    const int mi = method_index(method);
    const int si = snr_index(snr);
    if (mi < 0 || si < 0) continue;
    CellResult cell;
    cell.counts.n_ref = n_ref;
    cell.counts.sub = sub;
    cell.counts.del = del;
    cell.counts.ins = ins;
    cell.isolated_sum = isolated_sum;
    cell.utterances = utts;
    if (noise == "all") {
      report.cells[{mi, si}] = cell;
    } else {
      report.by_noise[noise][{mi, si}] = cell;
    }
  }
  return report;
}

void Experiment::do_report() {
  require_stage(Stage::kEvaluate, "report");
  ExperimentReport report = load_report_data();
  std::filesystem::create_directories(out_ / "report");
  write_report_txt(out_ / "report" / "report.txt", report);
  write_report_csv(out_ / "report" / "report.csv", report);
  write_curves_dat(out_ / "report" / "curves.dat", report);
}

}  // namespace mdt
