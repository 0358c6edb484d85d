#include "mdt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mdt/io_util.hpp"
#include "mdt/parallel.hpp"
#include "mdt/rng.hpp"

namespace mdt {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

// ---------------------------------------------------------------- lexicon

int Lexicon::find(const std::string& name) const {
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

void Lexicon::validate() const {
  if (words.size() < 2) throw std::invalid_argument("lexicon needs >= 2 words");
  for (const auto& w : words) {
    if (w.phones.empty()) {
      throw std::invalid_argument("word `" + w.name + "` has no phones");
    }
    for (const auto& p : w.phones) {
      if (p.min_frames <= 0 || p.max_frames < p.min_frames) {
        throw std::invalid_argument("phone `" + p.name +
                                    "` has invalid duration range");
      }
      if (p.formants.size() < 2 || p.formants.size() > 3) {
        throw std::invalid_argument("phone `" + p.name +
                                    "` needs 2-3 formants");
      }
    }
  }
}

namespace {

PhoneSpec vowel(const char* name, double f1, double f2, double f3) {
  return PhoneSpec{name,
                   {{f1, 90.0}, {f2, 120.0}, {f3, 150.0}},
                   true,
                   8,
                   14,
                   1.0};
}

PhoneSpec fricative(const char* name, double f1, double f2, double f3) {
  return PhoneSpec{name,
                   {{f1, 600.0}, {f2, 500.0}, {f3, 450.0}},
                   false,
                   5,
                   9,
                   0.35};
}

PhoneSpec nasal(const char* name, double f1, double f2, double f3) {
  return PhoneSpec{name,
                   {{f1, 60.0}, {f2, 250.0}, {f3, 350.0}},
                   true,
                   5,
                   9,
                   0.5};
}

}  // namespace

Lexicon Lexicon::builtin(int n_words) {
  const PhoneSpec aa = vowel("aa", 730, 1090, 2440);
  const PhoneSpec ee = vowel("ee", 270, 2290, 3010);
  const PhoneSpec oo = vowel("oo", 300, 870, 2240);
  const PhoneSpec eh = vowel("eh", 530, 1840, 2480);
  const PhoneSpec oh = vowel("oh", 570, 840, 2410);
  const PhoneSpec uh = vowel("uh", 640, 1190, 2390);
  const PhoneSpec ih = vowel("ih", 390, 1990, 2550);
  const PhoneSpec ae = vowel("ae", 660, 1720, 2410);
  const PhoneSpec ss = fricative("ss", 2500, 3200, 3600);
  const PhoneSpec sh = fricative("sh", 1800, 2600, 3300);
  const PhoneSpec ff = fricative("ff", 1200, 2500, 3400);
  const PhoneSpec mm = nasal("mm", 250, 1100, 2100);
  const PhoneSpec nn = nasal("nn", 280, 1700, 2600);

  // The desk vocabulary (first five) contains two minimal pairs whose
  // members differ only in a close vowel (ih/eh, oo/oh) plus one anchor
  // word: cleanly separable with decent models, genuinely confusable once
  // noise masks the first two formants.
  Lexicon lex;
  lex.words = {
      {"asi", {aa, ss, ee}},  {"isho", {ih, sh, oo}}, {"esho", {eh, sh, oo}},
      {"oma", {oo, mm, aa}},  {"ohma", {oh, mm, aa}}, {"ushi", {uh, sh, ih}},
      {"afa", {ae, ff, aa}},  {"omi", {oh, mm, ee}},  {"esu", {ee, ss, uh}},
      {"afi", {aa, ff, ih}},  {"ona", {oo, nn, eh}},
  };
  if (n_words < 2 || n_words > static_cast<int>(lex.words.size())) {
    throw std::invalid_argument("builtin lexicon supports 2.." +
                                std::to_string(lex.words.size()) + " words");
  }
  lex.words.resize(static_cast<std::size_t>(n_words));
  return lex;
}

// ------------------------------------------------------------------ noise

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "white") return NoiseKind::kWhite;
  if (name == "lowpass") return NoiseKind::kLowpass;
  if (name == "amplitude_modulated") return NoiseKind::kAmplitudeModulated;
  if (name == "harmonic_hum") return NoiseKind::kHarmonicHum;
  throw std::invalid_argument("unknown noise kind `" + name + "`");
}

std::string noise_kind_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kWhite: return "white";
    case NoiseKind::kLowpass: return "lowpass";
    case NoiseKind::kAmplitudeModulated: return "amplitude_modulated";
    case NoiseKind::kHarmonicHum: return "harmonic_hum";
  }
  return "?";
}

void NoiseSpec::validate(int sample_rate) const {
  const double nyquist = sample_rate / 2.0;
  if (lowpass_cutoff_hz <= 0 || lowpass_cutoff_hz >= nyquist) {
    throw std::invalid_argument("lowpass cutoff outside (0, Nyquist)");
  }
  if (mod_rate_hz <= 0 || mod_rate_hz >= nyquist) {
    throw std::invalid_argument("modulation rate outside (0, Nyquist)");
  }
  if (mod_depth < 0 || mod_depth > 1) {
    throw std::invalid_argument("modulation depth outside [0, 1]");
  }
  if (hum_f0_hz <= 0 || hum_f0_hz >= nyquist) {
    throw std::invalid_argument("hum fundamental outside (0, Nyquist)");
  }
}

Waveform synth_noise(const NoiseSpec& spec, std::size_t n_samples,
                     int sample_rate) {
  spec.validate(sample_rate);
  Rng rng(spec.seed);
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(n_samples);
  switch (spec.kind) {
    case NoiseKind::kWhite: {
      for (auto& s : w.samples) s = 0.1 * rng.gaussian();
      break;
    }
    case NoiseKind::kLowpass: {
      const double a = std::exp(-2.0 * kPi * spec.lowpass_cutoff_hz /
                                sample_rate);
      double y = 0.0;
      for (auto& s : w.samples) {
        y = a * y + (1.0 - a) * rng.gaussian();
        s = y;
      }
      break;
    }
    case NoiseKind::kAmplitudeModulated: {
      const double step = 2.0 * kPi * spec.mod_rate_hz / sample_rate;
      for (std::size_t i = 0; i < n_samples; ++i) {
        const double env =
            (1.0 + spec.mod_depth * std::sin(step * static_cast<double>(i))) /
            (1.0 + spec.mod_depth);
        w.samples[i] = 0.1 * env * rng.gaussian();
      }
      break;
    }
    case NoiseKind::kHarmonicHum: {
      const int n_harm = std::max(
          1, static_cast<int>(std::min(1000.0, sample_rate / 2.0 * 0.9) /
                              spec.hum_f0_hz));
      std::vector<double> phases(static_cast<std::size_t>(n_harm));
      for (auto& p : phases) p = rng.uniform(0.0, 2.0 * kPi);
      const double base = 2.0 * kPi * spec.hum_f0_hz / sample_rate;
      for (std::size_t i = 0; i < n_samples; ++i) {
        double v = 0.0;
        for (int h = 1; h <= n_harm; ++h) {
          v += std::sin(base * h * static_cast<double>(i) +
                        phases[static_cast<std::size_t>(h - 1)]) /
               h;
        }
        // small broadband component keeps every band's power nonzero
        w.samples[i] = 0.1 * v + 0.01 * rng.gaussian();
      }
      break;
    }
  }
  return w;
}

// -------------------------------------------------------------- synthesis

namespace {

struct Resonator {
  double a1 = 0.0, a2 = 0.0, g = 1.0;
  double y1 = 0.0, y2 = 0.0;

  void tune(double freq_hz, double bw_hz, double sample_rate) {
    const double r = std::exp(-kPi * bw_hz / sample_rate);
    a1 = 2.0 * r * std::cos(2.0 * kPi * freq_hz / sample_rate);
    a2 = -r * r;
    g = 1.0 - a1 - a2;  // unit DC gain
  }

  double step(double x) {
    const double y = g * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

struct FrameTrack {
  bool sounded = false;
  bool voiced = false;
  double gain = 0.0;
  double f[3] = {0, 0, 0};
  double bw[3] = {0, 0, 0};
};

}  // namespace

std::pair<Waveform, UttAnnotation> synth_utterance(
    const std::vector<int>& word_ids, const Lexicon& lexicon,
    std::uint64_t seed, const SynthConfig& cfg) {
  lexicon.validate();
  for (int w : word_ids) {
    if (w < 0 || w >= static_cast<int>(lexicon.words.size())) {
      throw std::invalid_argument("unknown word id " + std::to_string(w));
    }
  }

  Rng rng(seed);
  const double pitch = rng.uniform(cfg.pitch_lo_hz, cfg.pitch_hi_hz);

  // frame-level plan: phone index per frame (-1 = silence)
  struct PhoneSeg {
    const PhoneSpec* phone;
    int word_pos;  // index into word_ids, -1 for silence
    std::size_t begin, end;
  };
  std::vector<PhoneSeg> segs;
  UttAnnotation ann;
  ann.pitch_hz = pitch;

  std::size_t frame = static_cast<std::size_t>(cfg.lead_silence_frames);
  for (std::size_t wi = 0; wi < word_ids.size(); ++wi) {
    if (wi > 0) frame += static_cast<std::size_t>(cfg.gap_silence_frames);
    const LexiconWord& word =
        lexicon.words[static_cast<std::size_t>(word_ids[wi])];
    const std::size_t word_begin = frame;
    for (const PhoneSpec& ph : word.phones) {
      const int dur =
          ph.min_frames +
          static_cast<int>(rng.uniform_int(
              static_cast<std::uint64_t>(ph.max_frames - ph.min_frames + 1)));
      segs.push_back({&ph, static_cast<int>(wi), frame,
                      frame + static_cast<std::size_t>(dur)});
      frame += static_cast<std::size_t>(dur);
    }
    ann.words.push_back({word_ids[wi], word_begin, frame});
  }
  frame += static_cast<std::size_t>(cfg.trail_silence_frames);
  const std::size_t total_frames = frame;
  ann.total_frames = total_frames;

  std::vector<FrameTrack> track(total_frames);
  for (const PhoneSeg& seg : segs) {
    for (std::size_t t = seg.begin; t < seg.end; ++t) {
      FrameTrack& ft = track[t];
      ft.sounded = true;
      ft.voiced = seg.phone->voiced;
      ft.gain = seg.phone->gain;
      for (std::size_t j = 0; j < 3; ++j) {
        const std::size_t src = std::min(j, seg.phone->formants.size() - 1);
        ft.f[j] = seg.phone->formants[src].freq_hz;
        ft.bw[j] = seg.phone->formants[src].bandwidth_hz;
      }
    }
  }
  // linear formant interpolation across adjacent phones of the same word
  for (std::size_t si = 0; si + 1 < segs.size(); ++si) {
    const PhoneSeg& a = segs[si];
    const PhoneSeg& b = segs[si + 1];
    if (a.word_pos != b.word_pos || a.end != b.begin) continue;
    const std::ptrdiff_t zone = 2;
    for (std::ptrdiff_t d = -zone; d < zone; ++d) {
      const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(a.end) + d;
      if (t < static_cast<std::ptrdiff_t>(a.begin) ||
          t >= static_cast<std::ptrdiff_t>(b.end)) {
        continue;
      }
      const double alpha =
          (static_cast<double>(d + zone) + 0.5) / (2.0 * zone);
      FrameTrack& ft = track[static_cast<std::size_t>(t)];
      for (std::size_t j = 0; j < 3; ++j) {
        const std::size_t sa = std::min(j, a.phone->formants.size() - 1);
        const std::size_t sb = std::min(j, b.phone->formants.size() - 1);
        ft.f[j] = (1.0 - alpha) * a.phone->formants[sa].freq_hz +
                  alpha * b.phone->formants[sb].freq_hz;
        ft.bw[j] = (1.0 - alpha) * a.phone->formants[sa].bandwidth_hz +
                   alpha * b.phone->formants[sb].bandwidth_hz;
      }
    }
  }

  const std::size_t n_samples =
      total_frames * static_cast<std::size_t>(cfg.frame_shift) +
      static_cast<std::size_t>(cfg.frame_len - cfg.frame_shift);
  Waveform wave;
  wave.sample_rate = cfg.sample_rate;
  wave.samples.assign(n_samples, 0.0);

  Resonator res[3];
  double pulse_phase = 1.0;  // fire on the first voiced sample
  bool prev_voiced = false;
  const double pitch_step = pitch / cfg.sample_rate;

  for (std::size_t t = 0; t < total_frames; ++t) {
    const FrameTrack& ft = track[t];
    if (ft.sounded) {
      for (int j = 0; j < 3; ++j) {
        res[j].tune(ft.f[j], ft.bw[j], cfg.sample_rate);
      }
    }
    for (int i = 0; i < cfg.frame_shift; ++i) {
      const std::size_t idx =
          t * static_cast<std::size_t>(cfg.frame_shift) +
          static_cast<std::size_t>(i);
      double excite = 0.0;
      if (ft.sounded) {
        if (ft.voiced) {
          if (!prev_voiced) pulse_phase = 1.0;
          pulse_phase += pitch_step;
          if (pulse_phase >= 1.0) {
            pulse_phase -= 1.0;
            excite = 8.0;
          }
          prev_voiced = true;
        } else {
          excite = 0.5 * rng.gaussian();
          prev_voiced = false;
        }
        excite *= ft.gain;
      } else {
        prev_voiced = false;
      }
      double y = excite;
      for (auto& r : res) y = r.step(y);
      wave.samples[idx] = y;
    }
  }

  double peak = 0.0;
  for (double s : wave.samples) peak = std::max(peak, std::fabs(s));
  if (peak > 0.0) {
    const double scale = 0.5 / peak;
    for (double& s : wave.samples) s *= scale;
  }
  quantize_to_grid(wave);
  return {std::move(wave), std::move(ann)};
}

// ----------------------------------------------------------------- mixing

MixResult mix_at_snr(const Waveform& clean, const Waveform& noise_raw,
                     double snr_db) {
  if (clean.samples.size() != noise_raw.samples.size()) {
    throw std::invalid_argument("mix_at_snr: length mismatch");
  }
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("mix_at_snr: snr must be finite or +inf");
  }
  const double p_clean = mean_power(clean);
  if (!(p_clean > 0.0)) {
    throw std::invalid_argument("mix_at_snr: clean signal has zero power");
  }

  MixResult out;
  out.scaled_noise.sample_rate = clean.sample_rate;
  out.noisy.sample_rate = clean.sample_rate;

  if (std::isinf(snr_db)) {
    out.gain = 0.0;
    out.scaled_noise.samples.assign(clean.samples.size(), 0.0);
    out.noisy.samples = clean.samples;
    return out;
  }

  const double p_noise = mean_power(noise_raw);
  if (!(p_noise > 0.0)) {
    throw std::invalid_argument(
        "mix_at_snr: zero-power noise with finite snr requested");
  }
  out.gain = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));

  out.scaled_noise.samples.resize(clean.samples.size());
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    out.scaled_noise.samples[i] = out.gain * noise_raw.samples[i];
  }
  quantize_to_grid(out.scaled_noise);

  out.noisy.samples.resize(clean.samples.size());
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    out.noisy.samples[i] = clean.samples[i] + out.scaled_noise.samples[i];
  }
  return out;
}

// ----------------------------------------------------------------- config

CorpusConfig CorpusConfig::from_config(const Config& cfg,
                                       const std::string& section) {
  cfg.validate_keys(
      section,
      {"n_words", "train_utts_per_word", "test_utts_per_word", "noise_kinds",
       "train_snrs_db", "test_snrs_db", "multiword_fraction",
       "min_sequence_words", "max_sequence_words", "sample_rate",
       "lead_silence_frames", "trail_silence_frames", "gap_silence_frames",
       "pitch_lo_hz", "pitch_hi_hz", "lowpass_cutoff_hz", "mod_rate_hz",
       "mod_depth", "hum_f0_hz"});

  CorpusConfig out;
  out.n_words = static_cast<int>(cfg.get_int(section, "n_words", 5));
  out.train_utts_per_word =
      static_cast<int>(cfg.get_int(section, "train_utts_per_word", 40));
  out.test_utts_per_word =
      static_cast<int>(cfg.get_int(section, "test_utts_per_word", 20));
  out.noise_kinds.clear();
  for (const auto& name :
       cfg.get_list(section, "noise_kinds", "lowpass,amplitude_modulated")) {
    out.noise_kinds.push_back(parse_noise_kind(name));
  }
  out.train_snrs_db.clear();
  for (const auto& s : cfg.get_list(section, "train_snrs_db", "clean,20,10,5")) {
    out.train_snrs_db.push_back(parse_snr(s));
  }
  out.test_snrs_db.clear();
  for (const auto& s :
       cfg.get_list(section, "test_snrs_db", "clean,20,10,5,0,-5")) {
    out.test_snrs_db.push_back(parse_snr(s));
  }
  out.multiword_fraction = cfg.get_double(section, "multiword_fraction", 0.3);
  out.min_sequence_words =
      static_cast<int>(cfg.get_int(section, "min_sequence_words", 2));
  out.max_sequence_words =
      static_cast<int>(cfg.get_int(section, "max_sequence_words", 4));
  out.synth.sample_rate =
      static_cast<int>(cfg.get_int(section, "sample_rate", 8000));
  out.synth.lead_silence_frames =
      static_cast<int>(cfg.get_int(section, "lead_silence_frames", 8));
  out.synth.trail_silence_frames =
      static_cast<int>(cfg.get_int(section, "trail_silence_frames", 8));
  out.synth.gap_silence_frames =
      static_cast<int>(cfg.get_int(section, "gap_silence_frames", 6));
  out.synth.pitch_lo_hz = cfg.get_double(section, "pitch_lo_hz", 90.0);
  out.synth.pitch_hi_hz = cfg.get_double(section, "pitch_hi_hz", 200.0);
  out.noise_params.lowpass_cutoff_hz =
      cfg.get_double(section, "lowpass_cutoff_hz", 1800.0);
  out.noise_params.mod_rate_hz = cfg.get_double(section, "mod_rate_hz", 8.0);
  out.noise_params.mod_depth = cfg.get_double(section, "mod_depth", 0.8);
  out.noise_params.hum_f0_hz = cfg.get_double(section, "hum_f0_hz", 100.0);
  return out;
}

void CorpusConfig::validate() const {
  if (n_words < 2) throw std::invalid_argument("corpus needs >= 2 words");
  if (train_utts_per_word < 1 || test_utts_per_word < 1) {
    throw std::invalid_argument("utterances per word must be >= 1");
  }
  if (train_snrs_db.empty() || test_snrs_db.empty()) {
    throw std::invalid_argument("SNR lists must be non-empty");
  }
  const bool needs_noise =
      std::any_of(train_snrs_db.begin(), train_snrs_db.end(),
                  [](double s) { return std::isfinite(s); }) ||
      std::any_of(test_snrs_db.begin(), test_snrs_db.end(),
                  [](double s) { return std::isfinite(s); });
  if (needs_noise && noise_kinds.empty()) {
    throw std::invalid_argument("finite SNRs requested but no noise kinds");
  }
  if (multiword_fraction < 0.0 || multiword_fraction > 1.0) {
    throw std::invalid_argument("multiword_fraction outside [0, 1]");
  }
  if (multiword_fraction > 0.0 &&
      (min_sequence_words < 2 || max_sequence_words < min_sequence_words)) {
    throw std::invalid_argument("bad multiword sequence length range");
  }
  if (!(synth.pitch_lo_hz > 0) || synth.pitch_hi_hz < synth.pitch_lo_hz ||
      synth.pitch_hi_hz >= synth.sample_rate / 2.0) {
    throw std::invalid_argument("bad pitch range");
  }
}

// --------------------------------------------------------------- manifest

double parse_snr(const std::string& s) { return parse_double_str(s, "snr"); }

std::string snr_to_string(double snr_db) {
  if (std::isinf(snr_db)) return "clean";
  std::ostringstream os;
  os << snr_db;
  return os.str();
}

std::string ManifestEntry::base_id() const {
  auto first = id.find('-');
  if (first == std::string::npos) return id;
  auto second = id.find('-', first + 1);
  if (second == std::string::npos) return id;
  return id.substr(0, second);
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestEntry>& entries) {
  std::ostringstream os;
  for (const auto& e : entries) {
    os << e.id << '\t' << e.split << '\t';
    for (std::size_t i = 0; i < e.words.size(); ++i) {
      if (i) os << ',';
      os << e.words[i];
    }
    os << '\t' << snr_to_string(e.snr_db) << '\t' << e.noise_kind << '\t'
       << e.clean_path << '\t' << e.noise_path << '\t' << e.noisy_path << '\n';
  }
  write_text_file(path, os.str());
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw std::invalid_argument("manifest not found: " + path.string());
  }
  std::istringstream is(read_text_file(path));
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, '\t')) fields.push_back(field);
    if (fields.size() != 8) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected 8 tab-separated fields");
    }
    ManifestEntry e;
    e.id = fields[0];
    e.split = fields[1];
    std::istringstream ws(fields[2]);
    std::string word;
    while (std::getline(ws, word, ',')) {
      if (!word.empty()) e.words.push_back(word);
    }
    e.snr_db = parse_snr(fields[3]);
    e.noise_kind = fields[4];
    e.clean_path = fields[5];
    e.noise_path = fields[6];
    e.noisy_path = fields[7];
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_annotations(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, UttAnnotation>>& annotations,
    const Lexicon& lexicon) {
  std::ostringstream os;
  for (const auto& [base_id, ann] : annotations) {
    os << base_id << '\t' << ann.pitch_hz;
    for (const auto& span : ann.words) {
      os << '\t' << lexicon.words[static_cast<std::size_t>(span.word)].name
         << ':' << span.begin_frame << ':' << span.end_frame;
    }
    os << '\n';
  }
  write_text_file(path, os.str());
}

// ------------------------------------------------------------- generation

namespace {

struct CellSpec {
  double snr_db;
  int kind_index;  // -1 for the clean cell
  std::string tag;
};

std::vector<CellSpec> make_cells(const std::vector<double>& snrs,
                                 const std::vector<NoiseKind>& kinds) {
  std::vector<CellSpec> cells;
  for (double snr : snrs) {
    if (std::isinf(snr)) {
      cells.push_back({snr, -1, "clean"});
      continue;
    }
    for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
      std::ostringstream tag;
      tag << "snr" << snr << "_" << noise_kind_name(kinds[ki]);
      std::string t = tag.str();
      std::replace(t.begin(), t.end(), '-', 'm');
      std::replace(t.begin(), t.end(), '.', 'p');
      cells.push_back({snr, static_cast<int>(ki), t});
    }
  }
  return cells;
}

struct BasePlan {
  std::string base_id;
  int split;  // 0 train, 1 test
  std::size_t base_index;
  std::vector<int> word_ids;
  std::uint64_t synth_seed;
};

}  // namespace

CorpusStats generate_corpus(const CorpusConfig& cfg, const Lexicon& lexicon,
                            std::uint64_t master_seed,
                            const std::filesystem::path& out_dir,
                            unsigned jobs) {
  cfg.validate();
  lexicon.validate();
  if (cfg.n_words > static_cast<int>(lexicon.words.size())) {
    throw std::invalid_argument("corpus n_words exceeds lexicon size");
  }
  cfg.noise_params.validate(cfg.synth.sample_rate);

  const auto audio_dir = out_dir / "audio";
  std::filesystem::create_directories(audio_dir);

  const char* split_names[2] = {"train", "test"};
  const int utts_per_word[2] = {cfg.train_utts_per_word,
                                cfg.test_utts_per_word};
  const std::vector<CellSpec> cells[2] = {
      make_cells(cfg.train_snrs_db, cfg.noise_kinds),
      make_cells(cfg.test_snrs_db, cfg.noise_kinds)};

  std::vector<BasePlan> plans;
  for (int split = 0; split < 2; ++split) {
    std::size_t base_index = 0;
    for (int w = 0; w < cfg.n_words; ++w) {
      for (int rep = 0; rep < utts_per_word[split]; ++rep) {
        BasePlan plan;
        plan.split = split;
        plan.base_index = base_index++;
        {
          std::ostringstream id;
          id << split_names[split] << "-b";
          id.width(4);
          id.fill('0');
          id << plan.base_index;
          plan.base_id = id.str();
        }
        Rng structure(derive_seed(
            master_seed, SeedStream::kCorpusStructure,
            {static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(w),
             static_cast<std::uint64_t>(rep)}));
        plan.word_ids.push_back(w);
        if (structure.uniform() < cfg.multiword_fraction) {
          const int len =
              cfg.min_sequence_words +
              static_cast<int>(structure.uniform_int(static_cast<std::uint64_t>(
                  cfg.max_sequence_words - cfg.min_sequence_words + 1)));
          for (int i = 1; i < len; ++i) {
            plan.word_ids.push_back(static_cast<int>(
                structure.uniform_int(static_cast<std::uint64_t>(cfg.n_words))));
          }
        }
        plan.synth_seed = derive_seed(
            master_seed, SeedStream::kSynthUtterance,
            {static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(w),
             static_cast<std::uint64_t>(rep)});
        plans.push_back(std::move(plan));
      }
    }
  }

  std::vector<std::vector<ManifestEntry>> per_base_entries(plans.size());
  std::vector<std::pair<std::string, UttAnnotation>> annotations(plans.size());

  parallel_for(plans.size(), jobs, [&](std::size_t pi) {
    const BasePlan& plan = plans[pi];
    auto [clean, ann] = synth_utterance(plan.word_ids, lexicon,
                                        plan.synth_seed, cfg.synth);
    annotations[pi] = {plan.base_id, ann};

    const std::string clean_rel = "audio/" + plan.base_id + ".clean.f32";
    write_raw_audio(out_dir / clean_rel, clean);

    const auto& split_cells = cells[plan.split];
    const bool has_clean_cell =
        std::any_of(split_cells.begin(), split_cells.end(),
                    [](const CellSpec& c) { return c.kind_index < 0; });
    std::string zero_rel;
    if (has_clean_cell) {
      zero_rel = "audio/" + plan.base_id + ".zero.f32";
      Waveform zeros;
      zeros.sample_rate = clean.sample_rate;
      zeros.samples.assign(clean.samples.size(), 0.0);
      write_raw_audio(out_dir / zero_rel, zeros);
    }

    // one raw noise instance per (base, kind); cells differ only in scaling
    std::vector<Waveform> raw_noise(cfg.noise_kinds.size());
    for (std::size_t ki = 0; ki < cfg.noise_kinds.size(); ++ki) {
      bool used = std::any_of(
          split_cells.begin(), split_cells.end(), [&](const CellSpec& c) {
            return c.kind_index == static_cast<int>(ki);
          });
      if (!used) continue;
      NoiseSpec spec = cfg.noise_params;
      spec.kind = cfg.noise_kinds[ki];
      spec.seed = derive_seed(master_seed, SeedStream::kNoise,
                              {static_cast<std::uint64_t>(plan.split),
                               plan.base_index, ki});
      raw_noise[ki] = synth_noise(spec, clean.samples.size(),
                                  cfg.synth.sample_rate);
    }

    std::vector<ManifestEntry>& entries = per_base_entries[pi];
    for (const CellSpec& cell : split_cells) {
      ManifestEntry e;
      e.id = plan.base_id + "-" + cell.tag;
      e.split = split_names[plan.split];
      for (int wid : plan.word_ids) {
        e.words.push_back(lexicon.words[static_cast<std::size_t>(wid)].name);
      }
      e.snr_db = cell.snr_db;
      e.clean_path = clean_rel;
      if (cell.kind_index < 0) {
        e.noise_kind = "none";
        e.noise_path = zero_rel;
        e.noisy_path = clean_rel;
      } else {
        e.noise_kind =
            noise_kind_name(cfg.noise_kinds[static_cast<std::size_t>(
                cell.kind_index)]);
        MixResult mix = mix_at_snr(
            clean, raw_noise[static_cast<std::size_t>(cell.kind_index)],
            cell.snr_db);
        e.noise_path = "audio/" + e.id + ".noise.f32";
        e.noisy_path = "audio/" + e.id + ".noisy.f32";
        write_raw_audio(out_dir / e.noise_path, mix.scaled_noise);
        write_raw_audio(out_dir / e.noisy_path, mix.noisy);
      }
      entries.push_back(std::move(e));
    }
  });

  std::vector<ManifestEntry> all_entries;
  CorpusStats stats;
  stats.base_utterances = plans.size();
  for (std::size_t pi = 0; pi < plans.size(); ++pi) {
    for (auto& e : per_base_entries[pi]) {
      if (e.split == "train") {
        ++stats.train_entries;
      } else {
        ++stats.test_entries;
      }
      all_entries.push_back(std::move(e));
    }
  }
  write_manifest(out_dir / "manifest.tsv", all_entries);
  write_annotations(out_dir / "annotations.tsv", annotations, lexicon);
  return stats;
}

}  // namespace mdt
