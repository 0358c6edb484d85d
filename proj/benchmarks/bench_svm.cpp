#include <benchmark/benchmark.h>

#include "mdt/rng.hpp"
#include "mdt/svm.hpp"

namespace {

// one (state, band) model at bank scale: ~2000 frames of 138-dim features
void TrainBankSlot(benchmark::State& state) {
  mdt::Rng rng(11);
  const std::size_t n = 2000;
  const std::size_t dim = 138;
  mdt::Matrix X(n, dim);
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = rng.uniform() < 0.4;
    y[i] = pos ? 1 : 0;
    for (std::size_t d = 0; d < dim; ++d) {
      X(i, d) = rng.gaussian() + (pos && d < 20 ? 0.8 : 0.0);
    }
  }
  mdt::SvmTrainConfig cfg;
  cfg.epochs = 12;
  cfg.seed = 1;
  for (auto _ : state) {
    auto result = mdt::train_svm(X, y, cfg);
    benchmark::DoNotOptimize(result.final_objective);
  }
}
BENCHMARK(TrainBankSlot)->Unit(benchmark::kMillisecond);

}  // namespace
