#include "mdt/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mdt/io_util.hpp"

namespace mdt {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

// --------------------------------------------------------------- topology

int HmmTopology::total_states() const {
  int n = sil_states;
  for (int s : states_per_word) n += s;
  return n;
}

int HmmTopology::word_offset(int w) const {
  int off = 0;
  for (int i = 0; i < w; ++i) off += states_per_word[static_cast<std::size_t>(i)];
  return off;
}

int HmmTopology::silence_offset() const { return word_offset(n_words()); }

bool HmmTopology::is_silence(int global_state) const {
  return global_state >= silence_offset();
}

int HmmTopology::word_of(int global_state) const {
  if (is_silence(global_state)) return -1;
  int off = 0;
  for (int w = 0; w < n_words(); ++w) {
    off += states_per_word[static_cast<std::size_t>(w)];
    if (global_state < off) return w;
  }
  return -1;
}

int HmmTopology::local_state(int global_state) const {
  if (is_silence(global_state)) return global_state - silence_offset();
  return global_state - word_offset(word_of(global_state));
}

void HmmTopology::validate() const {
  if (word_names.size() != states_per_word.size()) {
    throw std::invalid_argument("topology: name/state-count size mismatch");
  }
  if (word_names.empty()) throw std::invalid_argument("topology: no words");
  if (sil_states < 1) throw std::invalid_argument("topology: sil_states < 1");
  for (int s : states_per_word) {
    if (s < 1) throw std::invalid_argument("topology: word with < 1 state");
  }
}

void HmmSet::validate() const {
  topo.validate();
  const int S = topo.total_states();
  if (static_cast<int>(states.size()) != S ||
      static_cast<int>(trans.size()) != S) {
    throw std::invalid_argument("hmm: state array size mismatch");
  }
  for (int s = 0; s < S; ++s) {
    const auto& gmm = states[static_cast<std::size_t>(s)];
    if (gmm.comps.empty()) throw std::invalid_argument("hmm: empty mixture");
    if (gmm.dim() != obs_dim()) {
      throw std::invalid_argument("hmm: mixture dimension mismatch");
    }
    double wsum = 0.0;
    for (const auto& c : gmm.comps) wsum += std::exp(c.log_weight);
    if (std::fabs(wsum - 1.0) > 1e-6) {
      throw std::invalid_argument("hmm: mixture weights do not sum to 1");
    }
    const auto& tr = trans[static_cast<std::size_t>(s)];
    const double tsum = std::exp(tr.log_self) + std::exp(tr.log_next);
    if (std::fabs(tsum - 1.0) > 1e-6) {
      throw std::invalid_argument("hmm: transition probs do not sum to 1");
    }
  }
}

// ---------------------------------------------------------- serialization

void HmmSet::save(const std::filesystem::path& path) const {
  auto os = open_out(path);
  write_magic(os, "HMM1");
  write_u32(os, 1);  // version
  write_u32(os, static_cast<std::uint32_t>(topo.n_words()));
  for (int w = 0; w < topo.n_words(); ++w) {
    const std::string& name = topo.word_names[static_cast<std::size_t>(w)];
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(
                      topo.states_per_word[static_cast<std::size_t>(w)]));
  }
  write_u32(os, static_cast<std::uint32_t>(topo.sil_states));
  write_u32(os, static_cast<std::uint32_t>(n_mel));
  write_u32(os, static_cast<std::uint32_t>(delta_half_width));
  for (const auto& gmm : states) {
    write_u32(os, static_cast<std::uint32_t>(gmm.comps.size()));
    for (const auto& c : gmm.comps) {
      write_f64(os, c.log_weight);
      write_f64_vec(os, c.mean);
      write_f64_vec(os, c.var);
    }
  }
  for (const auto& tr : trans) {
    write_f64(os, tr.log_self);
    write_f64(os, tr.log_next);
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

HmmSet HmmSet::load(const std::filesystem::path& path) {
  auto is = open_in(path);
  expect_magic(is, "HMM1", "model file " + path.string());
  const std::uint32_t version = read_u32(is);
  if (version != 1) {
    throw std::runtime_error("model file " + path.string() +
                             ": unsupported version " +
                             std::to_string(version));
  }
  HmmSet hmm;
  const std::uint32_t n_words = read_u32(is);
  for (std::uint32_t w = 0; w < n_words; ++w) {
    const std::uint32_t len = read_u32(is);
    std::string name(len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(len));
    if (!is) throw std::runtime_error("truncated model file");
    hmm.topo.word_names.push_back(std::move(name));
    hmm.topo.states_per_word.push_back(static_cast<int>(read_u32(is)));
  }
  hmm.topo.sil_states = static_cast<int>(read_u32(is));
  hmm.n_mel = static_cast<int>(read_u32(is));
  hmm.delta_half_width = static_cast<int>(read_u32(is));
  const int S = hmm.topo.total_states();
  const std::size_t D = hmm.obs_dim();
  hmm.states.resize(static_cast<std::size_t>(S));
  for (auto& gmm : hmm.states) {
    const std::uint32_t M = read_u32(is);
    gmm.comps.resize(M);
    for (auto& c : gmm.comps) {
      c.log_weight = read_f64(is);
      read_f64_vec(is, c.mean, D);
      read_f64_vec(is, c.var, D);
    }
    gmm.finalize();
  }
  hmm.trans.resize(static_cast<std::size_t>(S));
  for (auto& tr : hmm.trans) {
    tr.log_self = read_f64(is);
    tr.log_next = read_f64(is);
  }
  return hmm;
}

// ------------------------------------------------------------ graph build

namespace {

// Appends the chain for one word (or silence) and returns its node range.
// Nodes within a chain get self-loops and forward arcs using the trained
// transitions; the final state's log_next is left to cross-arc builders.
struct ChainRange {
  std::int32_t first;
  std::int32_t last;
};

ChainRange append_chain(DecodeGraph& g, const HmmSet& hmm, int word,
                        int first_global, int n_states) {
  ChainRange range{static_cast<std::int32_t>(g.nodes.size()), 0};
  for (int i = 0; i < n_states; ++i) {
    g.nodes.push_back({first_global + i, word, i == 0});
    g.in_arcs.emplace_back();
  }
  range.last = static_cast<std::int32_t>(g.nodes.size()) - 1;
  for (std::int32_t n = range.first; n <= range.last; ++n) {
    const int s = g.nodes[static_cast<std::size_t>(n)].global_state;
    g.in_arcs[static_cast<std::size_t>(n)].push_back(
        {n, hmm.trans[static_cast<std::size_t>(s)].log_self});
    if (n > range.first) {
      const int prev_s = g.nodes[static_cast<std::size_t>(n - 1)].global_state;
      g.in_arcs[static_cast<std::size_t>(n)].push_back(
          {n - 1, hmm.trans[static_cast<std::size_t>(prev_s)].log_next});
    }
  }
  return range;
}

void sort_arcs(DecodeGraph& g) {
  for (auto& arcs : g.in_arcs) {
    std::sort(arcs.begin(), arcs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  }
  std::sort(g.initial.begin(), g.initial.end());
  std::sort(g.finals.begin(), g.finals.end());
}

double chain_exit_lp(const HmmSet& hmm, const DecodeGraph& g,
                     std::int32_t last_node) {
  const int s = g.nodes[static_cast<std::size_t>(last_node)].global_state;
  return hmm.trans[static_cast<std::size_t>(s)].log_next;
}

}  // namespace

DecodeGraph build_word_loop_graph(const HmmSet& hmm,
                                  const GrammarOptions& opt) {
  const int n_words = hmm.topo.n_words();
  DecodeGraph g;
  std::vector<ChainRange> word_chain(static_cast<std::size_t>(n_words));
  for (int w = 0; w < n_words; ++w) {
    word_chain[static_cast<std::size_t>(w)] =
        append_chain(g, hmm, w, hmm.topo.word_offset(w),
                     hmm.topo.states_per_word[static_cast<std::size_t>(w)]);
  }
  ChainRange sil{-1, -1};
  const bool use_sil = opt.allow_silence && hmm.topo.sil_states > 0;
  if (use_sil) {
    sil = append_chain(g, hmm, -1, hmm.topo.silence_offset(),
                       hmm.topo.sil_states);
  }

  const double lp_word_uniform = -std::log(static_cast<double>(n_words));

  // initial distribution
  if (use_sil) {
    g.initial.push_back({sil.first, std::log(opt.p_initial_silence)});
    const double lp = std::log(1.0 - opt.p_initial_silence) + lp_word_uniform;
    for (int w = 0; w < n_words; ++w) {
      g.initial.push_back({word_chain[static_cast<std::size_t>(w)].first, lp});
    }
  } else {
    for (int w = 0; w < n_words; ++w) {
      g.initial.push_back(
          {word_chain[static_cast<std::size_t>(w)].first, lp_word_uniform});
    }
  }

  // word-final exits: end / silence / next word
  const double p_sil = use_sil ? opt.p_exit_to_silence : 0.0;
  const double p_word_total = 1.0 - opt.p_exit_to_end - p_sil;
  for (int w = 0; w < n_words; ++w) {
    const std::int32_t last = word_chain[static_cast<std::size_t>(w)].last;
    const double exit_lp = chain_exit_lp(hmm, g, last);
    g.finals.push_back({last, exit_lp + std::log(opt.p_exit_to_end)});
    if (use_sil) {
      g.in_arcs[static_cast<std::size_t>(sil.first)].push_back(
          {last, exit_lp + std::log(p_sil)});
    }
    const double lp = exit_lp + std::log(p_word_total) + lp_word_uniform;
    for (int w2 = 0; w2 < n_words; ++w2) {
      g.in_arcs[static_cast<std::size_t>(
                    word_chain[static_cast<std::size_t>(w2)].first)]
          .push_back({last, lp});
    }
  }

  // silence exits: end / next word
  if (use_sil) {
    const double exit_lp = chain_exit_lp(hmm, g, sil.last);
    g.finals.push_back({sil.last, exit_lp + std::log(opt.p_silence_to_end)});
    const double lp =
        exit_lp + std::log(1.0 - opt.p_silence_to_end) + lp_word_uniform;
    for (int w = 0; w < n_words; ++w) {
      g.in_arcs[static_cast<std::size_t>(
                    word_chain[static_cast<std::size_t>(w)].first)]
          .push_back({sil.last, lp});
    }
  }

  g.min_frames = 1;
  sort_arcs(g);
  return g;
}

DecodeGraph build_linear_graph(const HmmSet& hmm,
                               const std::vector<int>& words,
                               const GrammarOptions& opt) {
  if (words.empty()) {
    throw std::invalid_argument("linear graph needs a non-empty word sequence");
  }
  for (int w : words) {
    if (w < 0 || w >= hmm.topo.n_words()) {
      throw std::invalid_argument("word id out of range: " + std::to_string(w));
    }
  }
  const int n_words = hmm.topo.n_words();
  const double lp_word_uniform = -std::log(static_cast<double>(n_words));
  const bool use_sil = opt.allow_silence && hmm.topo.sil_states > 0;

  DecodeGraph g;
  // arc weights mirror the word-loop graph so that a forced path always
  // scores no better than the free decode of the same utterance
  std::vector<ChainRange> word_chain(words.size());
  std::vector<ChainRange> sil_chain(words.size() + 1, ChainRange{-1, -1});
  std::size_t min_frames = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (use_sil && i == 0) {
      sil_chain[0] = append_chain(g, hmm, -1, hmm.topo.silence_offset(),
                                  hmm.topo.sil_states);
    }
    word_chain[i] = append_chain(
        g, hmm, words[i], hmm.topo.word_offset(words[i]),
        hmm.topo.states_per_word[static_cast<std::size_t>(words[i])]);
    min_frames += static_cast<std::size_t>(
        hmm.topo.states_per_word[static_cast<std::size_t>(words[i])]);
    if (use_sil) {
      sil_chain[i + 1] = append_chain(g, hmm, -1, hmm.topo.silence_offset(),
                                      hmm.topo.sil_states);
    }
  }

  if (use_sil) {
    g.initial.push_back({sil_chain[0].first, std::log(opt.p_initial_silence)});
    g.initial.push_back(
        {word_chain[0].first,
         std::log(1.0 - opt.p_initial_silence) + lp_word_uniform});
    g.in_arcs[static_cast<std::size_t>(word_chain[0].first)].push_back(
        {sil_chain[0].last,
         chain_exit_lp(hmm, g, sil_chain[0].last) +
             std::log(1.0 - opt.p_silence_to_end) + lp_word_uniform});
  } else {
    g.initial.push_back({word_chain[0].first, lp_word_uniform});
  }

  const double p_sil = use_sil ? opt.p_exit_to_silence : 0.0;
  const double p_word_total = 1.0 - opt.p_exit_to_end - p_sil;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::int32_t last = word_chain[i].last;
    const double exit_lp = chain_exit_lp(hmm, g, last);
    const bool is_final_word = i + 1 == words.size();
    if (use_sil) {
      g.in_arcs[static_cast<std::size_t>(sil_chain[i + 1].first)].push_back(
          {last, exit_lp + std::log(p_sil)});
    }
    if (is_final_word) {
      g.finals.push_back({last, exit_lp + std::log(opt.p_exit_to_end)});
      if (use_sil) {
        g.finals.push_back(
            {sil_chain[i + 1].last,
             chain_exit_lp(hmm, g, sil_chain[i + 1].last) +
                 std::log(opt.p_silence_to_end)});
      }
    } else {
      g.in_arcs[static_cast<std::size_t>(word_chain[i + 1].first)].push_back(
          {last, exit_lp + std::log(p_word_total) + lp_word_uniform});
      if (use_sil) {
        g.in_arcs[static_cast<std::size_t>(word_chain[i + 1].first)].push_back(
            {sil_chain[i + 1].last,
             chain_exit_lp(hmm, g, sil_chain[i + 1].last) +
                 std::log(1.0 - opt.p_silence_to_end) + lp_word_uniform});
      }
    }
  }

  g.min_frames = min_frames;
  sort_arcs(g);
  return g;
}

DecodeGraph build_single_word_graph(const HmmSet& hmm, int word,
                                    const GrammarOptions& opt) {
  return build_linear_graph(hmm, {word}, opt);
}

// -------------------------------------------------------------- emissions

namespace {

std::vector<std::uint8_t> flatten_mask(const BinaryMask& mask,
                                       const HmmSet& hmm) {
  const std::size_t K = static_cast<std::size_t>(hmm.n_mel);
  if (mask.K != K) throw std::invalid_argument("mask band count mismatch");
  if (!mask.delta) {
    throw std::invalid_argument("decoder mask needs a delta companion");
  }
  std::vector<std::uint8_t> flags(mask.T * 2 * K);
  for (std::size_t t = 0; t < mask.T; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      flags[t * 2 * K + k] = mask.statics[t * K + k];
      flags[t * 2 * K + K + k] = (*mask.delta)[t * K + k];
    }
  }
  return flags;
}

}  // namespace

MaskedEmissionScorer::MaskedEmissionScorer(const HmmSet& hmm,
                                           const Matrix& obs,
                                           const BinaryMask& mask,
                                           const MarginalOptions& opt)
    : hmm_(hmm), obs_(obs), flags_(flatten_mask(mask, hmm)), opt_(opt) {
  if (obs.rows() != mask.T || obs.cols() != hmm.obs_dim()) {
    throw std::invalid_argument("obs/mask shape mismatch");
  }
  memo_ = Matrix(obs.rows(), static_cast<std::size_t>(hmm.topo.total_states()));
  have_.assign(memo_.rows() * memo_.cols(), 0);
}

double MaskedEmissionScorer::score(std::size_t t, int global_state) {
  const std::size_t idx =
      t * memo_.cols() + static_cast<std::size_t>(global_state);
  if (!have_[idx]) {
    const std::size_t D = hmm_.obs_dim();
    const double v = state_loglik(
        hmm_.states[static_cast<std::size_t>(global_state)],
        std::span<const double>(obs_.row(t), D),
        std::span<const std::uint8_t>(flags_.data() + t * D, D), opt_);
    memo_(t, static_cast<std::size_t>(global_state)) = v;
    have_[idx] = 1;
  }
  return memo_(t, static_cast<std::size_t>(global_state));
}

FullEmissionScorer::FullEmissionScorer(const HmmSet& hmm, const Matrix& obs)
    : hmm_(hmm), obs_(obs) {
  if (obs.cols() != hmm.obs_dim()) {
    throw std::invalid_argument("obs dimension mismatch");
  }
  memo_ = Matrix(obs.rows(), static_cast<std::size_t>(hmm.topo.total_states()));
  have_.assign(memo_.rows() * memo_.cols(), 0);
}

double FullEmissionScorer::score(std::size_t t, int global_state) {
  const std::size_t idx =
      t * memo_.cols() + static_cast<std::size_t>(global_state);
  if (!have_[idx]) {
    const std::size_t D = hmm_.obs_dim();
    memo_(t, static_cast<std::size_t>(global_state)) = state_full_loglik(
        hmm_.states[static_cast<std::size_t>(global_state)],
        std::span<const double>(obs_.row(t), D));
    have_[idx] = 1;
  }
  return memo_(t, static_cast<std::size_t>(global_state));
}

// ---------------------------------------------------------------- viterbi

DecodeResult viterbi_decode_graph(const DecodeGraph& graph, std::size_t T,
                                  EmissionScorer& emissions) {
  if (T == 0) throw std::invalid_argument("cannot decode zero frames");
  const std::size_t N = graph.nodes.size();

  std::vector<double> prev(N, kNegInf), cur(N, kNegInf);
  std::vector<std::int32_t> backptr(T * N, -1);

  for (const auto& [node, lp] : graph.initial) {
    const double v = lp + emissions.score(0, graph.nodes[static_cast<std::size_t>(node)].global_state);
    if (v > prev[static_cast<std::size_t>(node)]) {
      prev[static_cast<std::size_t>(node)] = v;
    }
  }

  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      double best = kNegInf;
      std::int32_t best_pred = -1;
      for (const auto& [pred, lp] : graph.in_arcs[n]) {
        const double cand = prev[static_cast<std::size_t>(pred)] + lp;
        if (cand > best) {  // strict: ties keep the lowest predecessor
          best = cand;
          best_pred = pred;
        }
      }
      if (best_pred >= 0 && best > kNegInf) {
        cur[n] = best + emissions.score(t, graph.nodes[n].global_state);
        backptr[t * N + n] = best_pred;
      } else {
        cur[n] = kNegInf;
      }
    }
    std::swap(prev, cur);
  }

  double best_total = kNegInf;
  std::int32_t best_node = -1;
  for (const auto& [node, lp] : graph.finals) {
    const double v = prev[static_cast<std::size_t>(node)] + lp;
    if (v > best_total) {
      best_total = v;
      best_node = node;
    }
  }
  if (best_node < 0 || best_total == kNegInf) {
    throw std::runtime_error("viterbi: no feasible path");
  }

  DecodeResult result;
  result.log_prob = best_total;
  std::vector<std::int32_t> path(T);
  path[T - 1] = best_node;
  for (std::size_t t = T - 1; t > 0; --t) {
    path[t - 1] = backptr[t * N + static_cast<std::size_t>(path[t])];
  }
  result.alignment.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto& node = graph.nodes[static_cast<std::size_t>(path[t])];
    result.alignment[t] = node.global_state;
    if (node.word >= 0 && node.word_entry &&
        (t == 0 || path[t] != path[t - 1])) {
      result.words.push_back(node.word);
    }
  }
  return result;
}

DecodeResult viterbi_decode(const HmmSet& hmm, const Matrix& obs,
                            const BinaryMask& mask, const DecodeGraph& graph,
                            const MarginalOptions& opt) {
  MaskedEmissionScorer scorer(hmm, obs, mask, opt);
  return viterbi_decode_graph(graph, obs.rows(), scorer);
}

DecodeResult viterbi_decode_full(const HmmSet& hmm, const Matrix& obs,
                                 const DecodeGraph& graph) {
  FullEmissionScorer scorer(hmm, obs);
  return viterbi_decode_graph(graph, obs.rows(), scorer);
}

std::vector<int> forced_align(const HmmSet& hmm, const Matrix& obs,
                              const BinaryMask& mask,
                              const std::vector<int>& words,
                              const MarginalOptions& opt,
                              const GrammarOptions& grammar,
                              double* score_out) {
  DecodeGraph graph = build_linear_graph(hmm, words, grammar);
  if (obs.rows() < graph.min_frames) {
    throw std::invalid_argument(
        "infeasible alignment: " + std::to_string(obs.rows()) +
        " frames < " + std::to_string(graph.min_frames) + " mandatory states");
  }
  MaskedEmissionScorer scorer(hmm, obs, mask, opt);
  DecodeResult result = viterbi_decode_graph(graph, obs.rows(), scorer);
  if (score_out) *score_out = result.log_prob;
  return result.alignment;
}

// ------------------------------------------------- state-conditioned mode

namespace {

class StateConditionedScorer : public EmissionScorer {
 public:
  StateConditionedScorer(const HmmSet& hmm, const Matrix& obs,
                         StateMaskSource& masks, const MarginalOptions& opt)
      : hmm_(hmm), obs_(obs), masks_(masks), opt_(opt) {
    memo_ = Matrix(obs.rows(),
                   static_cast<std::size_t>(hmm.topo.total_states()));
    have_.assign(memo_.rows() * memo_.cols(), 0);
  }

  double score(std::size_t t, int global_state) override {
    const std::size_t idx =
        t * memo_.cols() + static_cast<std::size_t>(global_state);
    if (!have_[idx]) {
      const std::size_t D = hmm_.obs_dim();
      const std::uint8_t* flags = masks_.mask(t, global_state);
      memo_(t, static_cast<std::size_t>(global_state)) = state_loglik(
          hmm_.states[static_cast<std::size_t>(global_state)],
          std::span<const double>(obs_.row(t), D),
          std::span<const std::uint8_t>(flags, D), opt_);
      have_[idx] = 1;
    }
    return memo_(t, static_cast<std::size_t>(global_state));
  }

 private:
  const HmmSet& hmm_;
  const Matrix& obs_;
  StateMaskSource& masks_;
  MarginalOptions opt_;
  Matrix memo_;
  std::vector<std::uint8_t> have_;
};

}  // namespace

DecodeResult viterbi_decode_state_conditioned(const HmmSet& hmm,
                                              const Matrix& obs,
                                              StateMaskSource& masks,
                                              const DecodeGraph& graph,
                                              const MarginalOptions& opt) {
  StateConditionedScorer scorer(hmm, obs, masks, opt);
  return viterbi_decode_graph(graph, obs.rows(), scorer);
}

}  // namespace mdt
