#include <benchmark/benchmark.h>

#include <cmath>

#include "mdt/gmm.hpp"
#include "mdt/hmm.hpp"
#include "mdt/rng.hpp"

namespace {

// desk-sized model: 5 words x 8 states + 3 silence, K = 23, M = 3
mdt::HmmSet desk_model(mdt::Rng& rng) {
  mdt::HmmSet hmm;
  for (int w = 0; w < 5; ++w) {
    hmm.topo.word_names.push_back("w" + std::to_string(w));
    hmm.topo.states_per_word.push_back(8);
  }
  hmm.topo.sil_states = 3;
  hmm.n_mel = 23;
  hmm.delta_half_width = 2;
  const std::size_t dim = hmm.obs_dim();
  for (int s = 0; s < hmm.topo.total_states(); ++s) {
    mdt::GaussianMixture gmm;
    for (int m = 0; m < 3; ++m) {
      mdt::GaussianComponent c;
      c.log_weight = std::log(1.0 / 3.0);
      c.mean.resize(dim);
      c.var.resize(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        c.mean[d] = rng.uniform(-3.0, 3.0);
        c.var[d] = rng.uniform(0.5, 2.0);
      }
      gmm.comps.push_back(std::move(c));
    }
    gmm.finalize();
    hmm.states.push_back(std::move(gmm));
    hmm.trans.push_back({std::log(0.7), std::log(0.3)});
  }
  return hmm;
}

void ViterbiWordLoop(benchmark::State& state) {
  mdt::Rng rng(3);
  const mdt::HmmSet hmm = desk_model(rng);
  const mdt::DecodeGraph graph = mdt::build_word_loop_graph(hmm);
  const std::size_t T = 60;
  mdt::Matrix obs(T, hmm.obs_dim());
  for (auto& v : obs.data()) v = rng.uniform(-3.0, 3.0);
  mdt::BinaryMask mask = mdt::all_reliable_mask(T, 23);
  // typical low-SNR sparsity
  mdt::Rng holes(5);
  for (auto& v : mask.statics) v = holes.uniform() < 0.3 ? 1 : 0;
  mdt::attach_delta(mask, mdt::DeltaConfig{2});
  mdt::MarginalOptions opt;
  opt.n_static = 23;
  for (auto _ : state) {
    auto result = mdt::viterbi_decode(hmm, obs, mask, graph, opt);
    benchmark::DoNotOptimize(result.log_prob);
  }
}
BENCHMARK(ViterbiWordLoop);

void BoundedMarginalFrame(benchmark::State& state) {
  mdt::Rng rng(4);
  const mdt::HmmSet hmm = desk_model(rng);
  std::vector<double> obs(hmm.obs_dim());
  for (auto& v : obs) v = rng.uniform(-3.0, 3.0);
  std::vector<std::uint8_t> reliable(hmm.obs_dim());
  for (auto& v : reliable) v = rng.uniform() < 0.3 ? 1 : 0;
  mdt::MarginalOptions opt;
  opt.n_static = 23;
  for (auto _ : state) {
    double acc = 0.0;
    for (const auto& gmm : hmm.states) {
      acc += mdt::state_loglik(gmm, obs, reliable, opt);
    }
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(BoundedMarginalFrame);

}  // namespace
