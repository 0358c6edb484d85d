#include "mdt/hmm_train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mdt/parallel.hpp"
#include "mdt/rng.hpp"

namespace mdt {

namespace {

struct FrameRef {
  std::uint32_t utt;
  std::uint32_t frame;
};

using Buckets = std::vector<std::vector<FrameRef>>;

const double* frame_of(const std::vector<TrainUtterance>& utts,
                       const FrameRef& fr) {
  return utts[fr.utt].obs.row(fr.frame);
}

// Hard-assignment k-means GMM fit; deterministic given the seed. Cluster
// count shrinks when the bucket is too small to support `mixtures`.
GaussianMixture fit_gmm_kmeans(const std::vector<TrainUtterance>& utts,
                               const std::vector<FrameRef>& bucket,
                               std::size_t dim, int mixtures,
                               const std::vector<double>& var_floor,
                               std::uint64_t seed) {
  const std::size_t n = bucket.size();
  const int m_eff = std::max(
      1, std::min(mixtures, static_cast<int>(n / 8)));

  GaussianMixture gmm;
  if (n == 0) {
    throw std::invalid_argument("cannot fit a mixture to an empty bucket");
  }

  std::vector<std::vector<double>> centers;
  Rng rng(seed);
  if (m_eff == 1) {
    centers.emplace_back(dim, 0.0);
  } else {
    // k-means++ style seeding on squared distances
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::size_t first = static_cast<std::size_t>(rng.uniform_int(n));
    centers.emplace_back(frame_of(utts, bucket[first]),
                         frame_of(utts, bucket[first]) + dim);
    while (static_cast<int>(centers.size()) < m_eff) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* x = frame_of(utts, bucket[i]);
        double dd = 0.0;
        const auto& c = centers.back();
        for (std::size_t d = 0; d < dim; ++d) {
          const double diff = x[d] - c[d];
          dd += diff * diff;
        }
        d2[i] = std::min(d2[i], dd);
        total += d2[i];
      }
      std::size_t pick = 0;
      if (total > 0.0) {
        double r = rng.uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          acc += d2[i];
          if (acc >= r) {
            pick = i;
            break;
          }
        }
      } else {
        pick = static_cast<std::size_t>(rng.uniform_int(n));
      }
      centers.emplace_back(frame_of(utts, bucket[pick]),
                           frame_of(utts, bucket[pick]) + dim);
    }
  }

  std::vector<int> assign(n, 0);
  const int m = static_cast<int>(centers.size());
  if (m > 1) {
    for (int iter = 0; iter < 10; ++iter) {
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        const double* x = frame_of(utts, bucket[i]);
        double best = std::numeric_limits<double>::infinity();
        int best_c = 0;
        for (int c = 0; c < m; ++c) {
          double dd = 0.0;
          for (std::size_t d = 0; d < dim; ++d) {
            const double diff = x[d] - centers[static_cast<std::size_t>(c)][d];
            dd += diff * diff;
          }
          if (dd < best) {
            best = dd;
            best_c = c;
          }
        }
        if (assign[i] != best_c) {
          assign[i] = best_c;
          changed = true;
        }
      }
      std::vector<std::size_t> counts(static_cast<std::size_t>(m), 0);
      for (auto& c : centers) std::fill(c.begin(), c.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double* x = frame_of(utts, bucket[i]);
        auto& c = centers[static_cast<std::size_t>(assign[i])];
        for (std::size_t d = 0; d < dim; ++d) c[d] += x[d];
        ++counts[static_cast<std::size_t>(assign[i])];
      }
      for (int c = 0; c < m; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0) {
          // reseed an empty cluster to the frame farthest from its center
          std::size_t far = static_cast<std::size_t>(rng.uniform_int(n));
          const double* x = frame_of(utts, bucket[far]);
          centers[static_cast<std::size_t>(c)].assign(x, x + dim);
          changed = true;
          continue;
        }
        for (std::size_t d = 0; d < dim; ++d) {
          centers[static_cast<std::size_t>(c)][d] /=
              static_cast<double>(counts[static_cast<std::size_t>(c)]);
        }
      }
      if (!changed && iter > 0) break;
    }
  }

  std::vector<std::size_t> counts(static_cast<std::size_t>(m), 0);
  std::vector<std::vector<double>> sum(static_cast<std::size_t>(m),
                                       std::vector<double>(dim, 0.0));
  std::vector<std::vector<double>> sumsq(static_cast<std::size_t>(m),
                                         std::vector<double>(dim, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = frame_of(utts, bucket[i]);
    const auto c = static_cast<std::size_t>(assign[i]);
    ++counts[c];
    for (std::size_t d = 0; d < dim; ++d) {
      sum[c][d] += x[d];
      sumsq[c][d] += x[d] * x[d];
    }
  }

  for (int c = 0; c < m; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    if (counts[ci] == 0) continue;  // dropped below
    GaussianComponent comp;
    comp.log_weight = std::log(static_cast<double>(counts[ci]) /
                               static_cast<double>(n));
    comp.mean.resize(dim);
    comp.var.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      const double mean = sum[ci][d] / static_cast<double>(counts[ci]);
      double var = sumsq[ci][d] / static_cast<double>(counts[ci]) - mean * mean;
      comp.mean[d] = mean;
      comp.var[d] = std::max(var, var_floor[d]);
    }
    gmm.comps.push_back(std::move(comp));
  }
  // renormalize if any cluster was dropped
  if (gmm.comps.size() > 1) {
    double total = 0.0;
    for (const auto& c : gmm.comps) total += std::exp(c.log_weight);
    for (auto& c : gmm.comps) c.log_weight -= std::log(total);
  } else {
    gmm.comps[0].log_weight = 0.0;
  }
  gmm.finalize();
  return gmm;
}

// One EM pass over a state's bucket; returns the data log-likelihood under
// the model *before* the update.
double em_pass(const std::vector<TrainUtterance>& utts,
               const std::vector<FrameRef>& bucket, GaussianMixture& gmm,
               const std::vector<double>& var_floor, bool update) {
  const std::size_t n = bucket.size();
  const std::size_t dim = gmm.dim();
  const std::size_t m = gmm.comps.size();
  double total_ll = 0.0;

  std::vector<double> occ(m, 0.0);
  std::vector<std::vector<double>> sum(m, std::vector<double>(dim, 0.0));
  std::vector<std::vector<double>> sumsq(m, std::vector<double>(dim, 0.0));
  std::vector<double> lls(m);

  for (std::size_t i = 0; i < n; ++i) {
    const double* x = frame_of(utts, bucket[i]);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m; ++c) {
      lls[c] = gmm.comps[c].log_weight +
               gaussian_full_loglik(gmm.comps[c],
                                    std::span<const double>(x, dim));
      best = std::max(best, lls[c]);
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < m; ++c) denom += std::exp(lls[c] - best);
    const double ll = best + std::log(denom);
    total_ll += ll;
    if (!update) continue;
    for (std::size_t c = 0; c < m; ++c) {
      const double g = std::exp(lls[c] - ll);
      occ[c] += g;
      for (std::size_t d = 0; d < dim; ++d) {
        sum[c][d] += g * x[d];
        sumsq[c][d] += g * x[d] * x[d];
      }
    }
  }

  if (update) {
    double occ_total = 0.0;
    for (double o : occ) occ_total += o;
    for (std::size_t c = 0; c < m; ++c) {
      if (occ[c] < 1e-8) continue;  // starved component keeps its parameters
      gmm.comps[c].log_weight = std::log(occ[c] / occ_total);
      for (std::size_t d = 0; d < dim; ++d) {
        const double mean = sum[c][d] / occ[c];
        double var = sumsq[c][d] / occ[c] - mean * mean;
        gmm.comps[c].mean[d] = mean;
        gmm.comps[c].var[d] = std::max(var, var_floor[d]);
      }
    }
    gmm.finalize();
  }
  return total_ll;
}

}  // namespace

HmmSet train_hmm(const std::vector<TrainUtterance>& utts,
                 const std::vector<std::string>& word_names, int n_mel,
                 int delta_half_width, const HmmTrainConfig& cfg,
                 unsigned jobs, HmmTrainStats* stats) {
  if (utts.empty()) throw std::invalid_argument("empty training set");
  const int n_words = static_cast<int>(word_names.size());

  std::vector<std::size_t> word_count(static_cast<std::size_t>(n_words), 0);
  for (const auto& u : utts) {
    for (int w : u.words) {
      if (w < 0 || w >= n_words) {
        throw std::invalid_argument("training word id out of range");
      }
      ++word_count[static_cast<std::size_t>(w)];
    }
  }
  for (int w = 0; w < n_words; ++w) {
    if (word_count[static_cast<std::size_t>(w)] <
        static_cast<std::size_t>(cfg.min_word_count)) {
      throw std::invalid_argument(
          "word `" + word_names[static_cast<std::size_t>(w)] +
          "` has no training data (needs >= " +
          std::to_string(cfg.min_word_count) + " occurrences)");
    }
  }

  HmmSet hmm;
  hmm.topo.word_names = word_names;
  hmm.topo.states_per_word.assign(static_cast<std::size_t>(n_words),
                                  cfg.states_per_word);
  hmm.topo.sil_states = cfg.sil_states;
  hmm.n_mel = n_mel;
  hmm.delta_half_width = delta_half_width;
  const int S = hmm.topo.total_states();
  const std::size_t dim = hmm.obs_dim();

  std::size_t total_frames = 0;
  for (const auto& u : utts) {
    if (u.obs.cols() != dim) {
      throw std::invalid_argument("training observation dimension mismatch");
    }
    total_frames += u.obs.rows();
  }

  // global variance -> per-dimension variance floor
  std::vector<double> gsum(dim, 0.0), gsumsq(dim, 0.0);
  for (const auto& u : utts) {
    for (std::size_t t = 0; t < u.obs.rows(); ++t) {
      const double* x = u.obs.row(t);
      for (std::size_t d = 0; d < dim; ++d) {
        gsum[d] += x[d];
        gsumsq[d] += x[d] * x[d];
      }
    }
  }
  std::vector<double> var_floor(dim);
  std::vector<double> gmean(dim), gvar(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    gmean[d] = gsum[d] / static_cast<double>(total_frames);
    gvar[d] = std::max(
        gsumsq[d] / static_cast<double>(total_frames) - gmean[d] * gmean[d],
        1e-8);
    var_floor[d] = std::max(cfg.var_floor_frac * gvar[d], 1e-10);
  }

  const double log_self = std::log(cfg.self_loop_init);
  const double log_next = std::log(1.0 - cfg.self_loop_init);
  hmm.trans.assign(static_cast<std::size_t>(S), {log_self, log_next});

  // flat start: uniform segmentation over [sil w1 sil w2 ... sil]
  Buckets buckets(static_cast<std::size_t>(S));
  for (std::size_t ui = 0; ui < utts.size(); ++ui) {
    const auto& u = utts[ui];
    std::vector<int> chain;
    auto push_sil = [&] {
      for (int i = 0; i < cfg.sil_states; ++i) {
        chain.push_back(hmm.topo.silence_offset() + i);
      }
    };
    push_sil();
    for (std::size_t wi = 0; wi < u.words.size(); ++wi) {
      const int off = hmm.topo.word_offset(u.words[wi]);
      for (int i = 0; i < cfg.states_per_word; ++i) chain.push_back(off + i);
      push_sil();
    }
    const std::size_t T = u.obs.rows();
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t pos = t * chain.size() / T;
      buckets[static_cast<std::size_t>(chain[pos])].push_back(
          {static_cast<std::uint32_t>(ui), static_cast<std::uint32_t>(t)});
    }
  }

  auto refit_states = [&](int pass, int mixtures) {
    std::vector<GaussianMixture> new_states(static_cast<std::size_t>(S));
    parallel_for(static_cast<std::size_t>(S), jobs, [&](std::size_t s) {
      if (buckets[s].empty()) {
        // states never visited fall back to the global distribution
        GaussianComponent comp;
        comp.log_weight = 0.0;
        comp.mean = gmean;
        comp.var = gvar;
        GaussianMixture gmm;
        gmm.comps.push_back(std::move(comp));
        gmm.finalize();
        new_states[s] = std::move(gmm);
        return;
      }
      new_states[s] = fit_gmm_kmeans(
          utts, buckets[s], dim, mixtures, var_floor,
          derive_seed(cfg.seed, SeedStream::kHmmKmeans,
                      {static_cast<std::uint64_t>(pass), s}));
    });
    hmm.states = std::move(new_states);
  };

  refit_states(0, 1);

  MarginalOptions mopt;
  mopt.n_static = static_cast<std::size_t>(n_mel);

  auto realign = [&]() {
    std::vector<std::vector<int>> aligns(utts.size());
    parallel_for(utts.size(), jobs, [&](std::size_t ui) {
      const auto& u = utts[ui];
      BinaryMask all = all_reliable_mask(u.obs.rows(),
                                         static_cast<std::size_t>(n_mel));
      aligns[ui] = forced_align(hmm, u.obs, all, u.words, mopt);
    });
    for (auto& b : buckets) b.clear();
    std::vector<std::size_t> selfs(static_cast<std::size_t>(S), 0);
    std::vector<std::size_t> exits(static_cast<std::size_t>(S), 0);
    for (std::size_t ui = 0; ui < utts.size(); ++ui) {
      const auto& a = aligns[ui];
      for (std::size_t t = 0; t < a.size(); ++t) {
        buckets[static_cast<std::size_t>(a[t])].push_back(
            {static_cast<std::uint32_t>(ui), static_cast<std::uint32_t>(t)});
        if (t + 1 < a.size()) {
          if (a[t + 1] == a[t]) {
            ++selfs[static_cast<std::size_t>(a[t])];
          } else {
            ++exits[static_cast<std::size_t>(a[t])];
          }
        } else {
          ++exits[static_cast<std::size_t>(a[t])];
        }
      }
    }
    for (int s = 0; s < S; ++s) {
      const auto si = static_cast<std::size_t>(s);
      const double self = static_cast<double>(selfs[si]) + 1.0;
      const double exit = static_cast<double>(exits[si]) + 1.0;
      hmm.trans[si].log_self = std::log(self / (self + exit));
      hmm.trans[si].log_next = std::log(exit / (self + exit));
    }
  };

  for (int pass = 1; pass <= cfg.kmeans_passes; ++pass) {
    realign();
    refit_states(pass, cfg.mixtures);
  }

  // EM refinement with the final alignment fixed
  realign();
  if (stats) {
    stats->total_frames = total_frames;
    stats->em_loglik_trace.clear();
  }
  for (int pass = 0; pass <= cfg.em_passes; ++pass) {
    const bool update = pass < cfg.em_passes;
    std::vector<double> state_ll(static_cast<std::size_t>(S), 0.0);
    parallel_for(static_cast<std::size_t>(S), jobs, [&](std::size_t s) {
      if (buckets[s].empty()) return;
      state_ll[s] = em_pass(utts, buckets[s], hmm.states[s], var_floor, update);
    });
    if (stats) {
      double total = 0.0;
      for (double v : state_ll) total += v;
      stats->em_loglik_trace.push_back(total);
    }
    if (!update) break;
  }

  hmm.validate();
  return hmm;
}

}  // namespace mdt
