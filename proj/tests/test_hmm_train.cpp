#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <map>

#include "doctest.h"
#include "mdt/hmm_train.hpp"
#include "mdt/io_util.hpp"
#include "mdt/rng.hpp"

using namespace mdt;

namespace {

// utterances that walk [sil w0_0 w0_1 w0_2 sil] with distinct block means
TrainUtterance block_utterance(Rng& rng, int word, double noise_scale) {
  TrainUtterance u;
  u.words = {word};
  const int frames_per_block = 6;
  const std::size_t dim = 4;  // n_mel = 2
  const int blocks = 5;
  u.obs = Matrix(static_cast<std::size_t>(blocks * frames_per_block), dim);
  for (int b = 0; b < blocks; ++b) {
    for (int f = 0; f < frames_per_block; ++f) {
      const std::size_t t = static_cast<std::size_t>(b * frames_per_block + f);
      for (std::size_t d = 0; d < dim; ++d) {
        // silence blocks (0 and 4) sit near zero, word blocks far apart
        double center = 0.0;
        if (b >= 1 && b <= 3) {
          center = 10.0 * b + 3.0 * static_cast<double>(d) +
                   20.0 * static_cast<double>(word);
        }
        u.obs(t, d) = center + noise_scale * rng.gaussian();
      }
    }
  }
  return u;
}

HmmTrainConfig small_cfg() {
  HmmTrainConfig cfg;
  cfg.states_per_word = 3;
  cfg.sil_states = 1;
  cfg.mixtures = 1;
  cfg.kmeans_passes = 4;
  cfg.em_passes = 3;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("training on copies of one utterance recovers segment means") {
  Rng rng(1);
  TrainUtterance proto = block_utterance(rng, 0, 0.3);
  std::vector<TrainUtterance> utts(8, proto);

  HmmTrainConfig cfg = small_cfg();
  HmmSet hmm = train_hmm(utts, {"w0"}, 2, 2, cfg, 1);

  // closed-form check: re-align the utterance, average the frames assigned
  // to each state, compare with the trained means
  MarginalOptions opt;
  opt.n_static = 2;
  BinaryMask all = all_reliable_mask(proto.obs.rows(), 2);
  std::vector<int> align = forced_align(hmm, proto.obs, all, {0}, opt);
  std::map<int, std::pair<std::vector<double>, std::size_t>> sums;
  for (std::size_t t = 0; t < align.size(); ++t) {
    auto& [sum, count] = sums[align[t]];
    sum.resize(4, 0.0);
    for (std::size_t d = 0; d < 4; ++d) sum[d] += proto.obs(t, d);
    ++count;
  }
  for (const auto& [state, data] : sums) {
    const auto& [sum, count] = data;
    REQUIRE(hmm.states[static_cast<std::size_t>(state)].comps.size() == 1);
    const auto& mean = hmm.states[static_cast<std::size_t>(state)].comps[0].mean;
    for (std::size_t d = 0; d < 4; ++d) {
      CHECK(mean[d] ==
            doctest::Approx(sum[d] / static_cast<double>(count)).epsilon(1e-9));
    }
  }
}

TEST_CASE("EM refinement log-likelihood is nondecreasing") {
  Rng rng(2);
  std::vector<TrainUtterance> utts;
  for (int i = 0; i < 10; ++i) {
    utts.push_back(block_utterance(rng, 0, 1.0));
    utts.push_back(block_utterance(rng, 1, 1.0));
  }
  HmmTrainConfig cfg = small_cfg();
  cfg.mixtures = 2;
  cfg.em_passes = 4;
  HmmTrainStats stats;
  train_hmm(utts, {"w0", "w1"}, 2, 2, cfg, 2, &stats);
  REQUIRE(stats.em_loglik_trace.size() ==
          static_cast<std::size_t>(cfg.em_passes) + 1);
  for (std::size_t i = 1; i < stats.em_loglik_trace.size(); ++i) {
    CHECK(stats.em_loglik_trace[i] >=
          stats.em_loglik_trace[i - 1] - 1e-8 *
              std::fabs(stats.em_loglik_trace[i - 1]));
  }
}

TEST_CASE("training is deterministic across runs and worker counts") {
  Rng rng(3);
  std::vector<TrainUtterance> utts;
  for (int i = 0; i < 6; ++i) {
    utts.push_back(block_utterance(rng, 0, 0.8));
    utts.push_back(block_utterance(rng, 1, 0.8));
  }
  HmmTrainConfig cfg = small_cfg();
  cfg.mixtures = 2;

  const auto p1 = std::filesystem::temp_directory_path() / "t_hmm_a.bin";
  const auto p2 = std::filesystem::temp_directory_path() / "t_hmm_b.bin";
  train_hmm(utts, {"w0", "w1"}, 2, 2, cfg, 1).save(p1);
  train_hmm(utts, {"w0", "w1"}, 2, 2, cfg, 3).save(p2);
  CHECK(read_text_file(p1) == read_text_file(p2));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("a word with no training data is an error naming the word") {
  Rng rng(4);
  std::vector<TrainUtterance> utts = {block_utterance(rng, 0, 0.5)};
  HmmTrainConfig cfg = small_cfg();
  CHECK_THROWS_WITH_AS(train_hmm(utts, {"w0", "missing_word"}, 2, 2, cfg, 1),
                       doctest::Contains("missing_word"),
                       std::invalid_argument);
}

TEST_CASE("empty training set is an error") {
  HmmTrainConfig cfg = small_cfg();
  CHECK_THROWS_AS(train_hmm({}, {"w0"}, 2, 2, cfg, 1), std::invalid_argument);
}

TEST_CASE("trained model passes validation and transitions sum to one") {
  Rng rng(5);
  std::vector<TrainUtterance> utts;
  for (int i = 0; i < 5; ++i) utts.push_back(block_utterance(rng, 0, 0.5));
  HmmTrainConfig cfg = small_cfg();
  HmmSet hmm = train_hmm(utts, {"w0"}, 2, 2, cfg, 1);
  hmm.validate();
  for (const auto& tr : hmm.trans) {
    CHECK(std::exp(tr.log_self) + std::exp(tr.log_next) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  // variances respect the floor
  for (const auto& gmm : hmm.states) {
    for (const auto& c : gmm.comps) {
      for (double v : c.var) CHECK(v > 0.0);
    }
  }
}
