#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mdt/gmm.hpp"
#include "mdt/mask.hpp"
#include "mdt/matrix.hpp"

namespace mdt {

// Word-level left-to-right topology with one shared silence model. Global
// state indices are laid out word by word in lexicon order, silence states
// last, so the silence offset equals the sum of per-word state counts.
struct HmmTopology {
  std::vector<std::string> word_names;
  std::vector<int> states_per_word;
  int sil_states = 3;

  int n_words() const { return static_cast<int>(word_names.size()); }
  int total_states() const;
  int word_offset(int w) const;
  int silence_offset() const;
  bool is_silence(int global_state) const;
  int word_of(int global_state) const;  // -1 for silence
  int local_state(int global_state) const;
  void validate() const;
};

struct StateTransitions {
  double log_self = 0.0;
  double log_next = 0.0;  // on the last state of a chain this is the exit mass
};

struct HmmSet {
  HmmTopology topo;
  int n_mel = 0;            // K; observations are 2K (static + delta)
  int delta_half_width = 2;
  std::vector<GaussianMixture> states;
  std::vector<StateTransitions> trans;

  std::size_t obs_dim() const { return 2 * static_cast<std::size_t>(n_mel); }
  void validate() const;

  // versioned binary, magic "HMM1", little-endian f64 parameters
  void save(const std::filesystem::path& path) const;
  static HmmSet load(const std::filesystem::path& path);
};

struct GrammarOptions {
  bool allow_silence = true;
  double p_initial_silence = 0.5;
  double p_exit_to_end = 1.0 / 3.0;
  double p_exit_to_silence = 1.0 / 3.0;
  double p_silence_to_end = 0.5;
};

// Composed decode graph. For loop grammars nodes are created in global-state
// order so node index ties equal global-state ties; linear graphs order
// nodes by position in the transcription.
struct DecodeGraph {
  struct Node {
    int global_state;
    int word;  // lexicon index, -1 for silence
    bool word_entry;
  };
  std::vector<Node> nodes;
  // per node: (predecessor node, log prob), ascending predecessor
  std::vector<std::vector<std::pair<std::int32_t, double>>> in_arcs;
  std::vector<std::pair<std::int32_t, double>> initial;  // ascending node
  std::vector<std::pair<std::int32_t, double>> finals;   // ascending node
  std::size_t min_frames = 0;  // mandatory (non-skippable) states
};

// word loop with optional inter-word silence
DecodeGraph build_word_loop_graph(const HmmSet& hmm,
                                  const GrammarOptions& opt = {});
// the single-word grammar is the linear graph of a one-word transcription
DecodeGraph build_linear_graph(const HmmSet& hmm,
                               const std::vector<int>& words,
                               const GrammarOptions& opt = {});
DecodeGraph build_single_word_graph(const HmmSet& hmm, int word,
                                    const GrammarOptions& opt = {});

class EmissionScorer {
 public:
  virtual ~EmissionScorer() = default;
  virtual double score(std::size_t t, int global_state) = 0;
};

// One mask per frame, shared by all states; scores are memoized.
class MaskedEmissionScorer : public EmissionScorer {
 public:
  MaskedEmissionScorer(const HmmSet& hmm, const Matrix& obs,
                       const BinaryMask& mask, const MarginalOptions& opt);
  double score(std::size_t t, int global_state) override;

 private:
  const HmmSet& hmm_;
  const Matrix& obs_;
  std::vector<std::uint8_t> flags_;  // T x 2K
  MarginalOptions opt_;
  Matrix memo_;
  std::vector<std::uint8_t> have_;
};

// Mask-free likelihood path (plain diagonal Gaussians over every dim).
class FullEmissionScorer : public EmissionScorer {
 public:
  FullEmissionScorer(const HmmSet& hmm, const Matrix& obs);
  double score(std::size_t t, int global_state) override;

 private:
  const HmmSet& hmm_;
  const Matrix& obs_;
  Matrix memo_;
  std::vector<std::uint8_t> have_;
};

struct DecodeResult {
  std::vector<int> words;      // lexicon indices in decoded order
  std::vector<int> alignment;  // global state per frame
  double log_prob = 0.0;
};

// Exact max-product DP; ties broken toward the lower node index (equal to
// the lower global state index on loop graphs).
DecodeResult viterbi_decode_graph(const DecodeGraph& graph, std::size_t T,
                                  EmissionScorer& emissions);

DecodeResult viterbi_decode(const HmmSet& hmm, const Matrix& obs,
                            const BinaryMask& mask, const DecodeGraph& graph,
                            const MarginalOptions& opt);
DecodeResult viterbi_decode_full(const HmmSet& hmm, const Matrix& obs,
                                 const DecodeGraph& graph);

// Viterbi restricted to the transcription's linear graph. Returns the
// per-frame global state sequence; score_out (optional) receives the path
// log-probability.
std::vector<int> forced_align(const HmmSet& hmm, const Matrix& obs,
                              const BinaryMask& mask,
                              const std::vector<int>& words,
                              const MarginalOptions& opt,
                              const GrammarOptions& grammar = {},
                              double* score_out = nullptr);

// Per-(frame, state) masks for state-conditioned decoding.
class StateMaskSource {
 public:
  virtual ~StateMaskSource() = default;
  // 2K reliability flags for frame t under state s's mask estimator
  virtual const std::uint8_t* mask(std::size_t t, int global_state) = 0;
};

DecodeResult viterbi_decode_state_conditioned(const HmmSet& hmm,
                                              const Matrix& obs,
                                              StateMaskSource& masks,
                                              const DecodeGraph& graph,
                                              const MarginalOptions& opt);

}  // namespace mdt
