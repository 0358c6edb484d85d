#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mdt/audio.hpp"
#include "mdt/config.hpp"

namespace mdt {

struct FormantSpec {
  double freq_hz;
  double bandwidth_hz;
};

struct PhoneSpec {
  std::string name;
  std::vector<FormantSpec> formants;  // 2-3 resonances
  bool voiced;
  int min_frames;
  int max_frames;
  double gain = 1.0;
};

struct LexiconWord {
  std::string name;
  std::vector<PhoneSpec> phones;
};

struct Lexicon {
  std::vector<LexiconWord> words;

  int find(const std::string& name) const;  // -1 if unknown
  void validate() const;

  // 11 synthetic CVC-style words with well-separated formant patterns; the
  // desk corpus uses the first 5, the 11x16-state preset uses all of them.
  static Lexicon builtin(int n_words);
};

enum class NoiseKind { kWhite, kLowpass, kAmplitudeModulated, kHarmonicHum };

NoiseKind parse_noise_kind(const std::string& name);
std::string noise_kind_name(NoiseKind kind);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kWhite;
  std::uint64_t seed = 0;
  double lowpass_cutoff_hz = 1800.0;
  double mod_rate_hz = 8.0;
  double mod_depth = 0.8;
  double hum_f0_hz = 100.0;

  void validate(int sample_rate) const;
};

Waveform synth_noise(const NoiseSpec& spec, std::size_t n_samples,
                     int sample_rate);

struct SynthConfig {
  int sample_rate = 8000;
  int frame_shift = 80;   // boundary annotations are in these frame units
  int frame_len = 200;    // extra tail so the last frame is complete
  int lead_silence_frames = 8;
  int trail_silence_frames = 8;
  int gap_silence_frames = 6;
  double pitch_lo_hz = 90.0;
  double pitch_hi_hz = 200.0;
};

struct WordSpan {
  int word;                 // lexicon index
  std::size_t begin_frame;  // inclusive
  std::size_t end_frame;    // exclusive
};

struct UttAnnotation {
  std::vector<WordSpan> words;
  double pitch_hz = 0.0;
  std::size_t total_frames = 0;
};

// Pulse-train / noise source through per-formant resonators, with linear
// formant interpolation across phone boundaries and leading/trailing
// silence. Peak-normalized to 0.5 and snapped to the amplitude grid.
// Deterministic given (words, lexicon, seed).
std::pair<Waveform, UttAnnotation> synth_utterance(
    const std::vector<int>& word_ids, const Lexicon& lexicon,
    std::uint64_t seed, const SynthConfig& cfg);

struct MixResult {
  Waveform noisy;
  Waveform scaled_noise;
  double gain = 0.0;
};

// g = sqrt(P_clean / (P_noise_raw * 10^(snr_db/10))); snr_db = +inf gives
// g = 0 and noisy == clean bit-exactly. The scaled noise is snapped to the
// amplitude grid so the additive identity survives f32 files.
MixResult mix_at_snr(const Waveform& clean, const Waveform& noise_raw,
                     double snr_db);

struct CorpusConfig {
  int n_words = 5;
  int train_utts_per_word = 40;
  int test_utts_per_word = 20;
  std::vector<NoiseKind> noise_kinds = {NoiseKind::kLowpass,
                                        NoiseKind::kAmplitudeModulated};
  std::vector<double> train_snrs_db;  // default {inf, 20, 10, 5}
  std::vector<double> test_snrs_db;   // default {inf, 20, 10, 5, 0, -5}
  double multiword_fraction = 0.3;
  int min_sequence_words = 2;
  int max_sequence_words = 4;
  SynthConfig synth;
  NoiseSpec noise_params;  // kind/seed ignored; carries the knobs

  static CorpusConfig from_config(const Config& cfg,
                                  const std::string& section = "corpus");
  void validate() const;
};

struct ManifestEntry {
  std::string id;       // "<split>-<base index>-<cell tag>"
  std::string split;    // "train" | "test"
  std::vector<std::string> words;
  double snr_db;        // +inf for clean
  std::string noise_kind;  // "none" for clean
  std::string clean_path;  // relative to the manifest directory
  std::string noise_path;
  std::string noisy_path;

  std::string base_id() const;  // "<split>-<base index>"
};

double parse_snr(const std::string& s);
std::string snr_to_string(double snr_db);

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

// Ground-truth word boundaries of each base utterance, one line per base:
// `base_id<TAB>pitch_hz<TAB>word:begin:end ...`
void write_annotations(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, UttAnnotation>>&
                           annotations,
                       const Lexicon& lexicon);

struct CorpusStats {
  std::size_t train_entries = 0;
  std::size_t test_entries = 0;
  std::size_t base_utterances = 0;
};

// Writes audio + manifest + annotations under out_dir. Fully deterministic
// given (lexicon, config, master seed); parallel generation produces output
// identical to sequential generation.
CorpusStats generate_corpus(const CorpusConfig& cfg, const Lexicon& lexicon,
                            std::uint64_t master_seed,
                            const std::filesystem::path& out_dir,
                            unsigned jobs);

}  // namespace mdt
