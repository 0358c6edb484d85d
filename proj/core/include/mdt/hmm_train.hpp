#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdt/hmm.hpp"
#include "mdt/matrix.hpp"

namespace mdt {

struct HmmTrainConfig {
  int states_per_word = 8;
  int sil_states = 3;
  int mixtures = 3;
  int kmeans_passes = 6;  // segmental k-means (Viterbi training) passes
  int em_passes = 2;      // GMM EM refinement with the final alignment fixed
  double var_floor_frac = 1e-3;  // of the global per-dimension variance
  int min_word_count = 1;
  double self_loop_init = 0.6;
  std::uint64_t seed = 0;
};

struct TrainUtterance {
  std::vector<int> words;  // lexicon indices
  Matrix obs;              // T x 2K stacked static+delta
};

struct HmmTrainStats {
  // training-set log-likelihood at each EM refinement boundary (first entry
  // is before any EM update); nondecreasing up to variance-floor effects
  std::vector<double> em_loglik_trace;
  std::size_t total_frames = 0;
};

// Flat-start uniform segmentation, then fixed-count segmental k-means with
// per-state GMM refits, then EM refinement of the mixtures under the final
// alignment. Deterministic given the config seed; parallel accumulation is
// merged in utterance order so worker count cannot change the result.
HmmSet train_hmm(const std::vector<TrainUtterance>& utts,
                 const std::vector<std::string>& word_names, int n_mel,
                 int delta_half_width, const HmmTrainConfig& cfg,
                 unsigned jobs, HmmTrainStats* stats = nullptr);

}  // namespace mdt
