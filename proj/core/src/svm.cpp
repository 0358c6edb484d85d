#include "mdt/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mdt/rng.hpp"

namespace mdt {

double LinearSvm::decision(const double* x) const {
  double acc = b;
  for (std::size_t d = 0; d < w.size(); ++d) acc += w[d] * x[d];
  return acc;
}

double svm_objective(const std::vector<double>& w, double b, const Matrix& X,
                     const std::vector<std::uint8_t>& labels, double lambda) {
  double reg = 0.0;
  for (double v : w) reg += v * v;
  reg *= 0.5 * lambda;
  double hinge = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double* x = X.row(i);
    double margin = b;
    for (std::size_t d = 0; d < X.cols(); ++d) margin += w[d] * x[d];
    const double y = labels[i] ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - y * margin);
  }
  return reg + hinge / static_cast<double>(X.rows());
}

namespace {

void compute_scores(const std::vector<double>& w, const Matrix& X,
                    std::vector<double>& scores) {
  const std::size_t n = X.rows();
  const std::size_t dim = X.cols();
  scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = X.row(i);
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) s += w[d] * x[d];
    scores[i] = s;
  }
}

// Exact minimization of the objective over the bias alone. The hinge sum is
// convex piecewise linear in b, so a minimum sits on a breakpoint; one
// sorted sweep with incremental slope bookkeeping finds it.
double exact_bias_step(const std::vector<double>& scores,
                       const std::vector<std::uint8_t>& labels) {
  const std::size_t n = scores.size();
  // at breakpoint b_i = y_i - s_i, sample i's margin equals 1;
  // positives are active (hinged) below their breakpoint, negatives above
  std::vector<std::pair<double, int>> breaks(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = labels[i] ? 1.0 : -1.0;
    breaks[i] = {y - scores[i], labels[i] ? 1 : -1};
  }
  std::sort(breaks.begin(), breaks.end());

  // hinge value at the smallest breakpoint, and the active counts valid on
  // the open interval just to its right: positives are active while their
  // breakpoint lies ahead, negatives once theirs is behind (or here)
  const double b0 = breaks[0].first;
  double hinge = 0.0;
  std::size_t pos_active = 0, neg_active = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = labels[i] ? 1.0 : -1.0;
    const double bi = y - scores[i];
    hinge += std::max(0.0, 1.0 - y * (scores[i] + b0));
    if (labels[i]) {
      if (bi > b0) ++pos_active;
    } else {
      if (bi <= b0) ++neg_active;
    }
  }
  // walking right: d(hinge)/db = neg_active - pos_active on each interval
  double best = hinge;
  double best_b = b0;
  for (std::size_t j = 1; j < n; ++j) {
    const double db = breaks[j].first - breaks[j - 1].first;
    hinge += db * (static_cast<double>(neg_active) -
                   static_cast<double>(pos_active));
    if (hinge < best - 1e-15 * (1.0 + std::fabs(best))) {
      best = hinge;
      best_b = breaks[j].first;
    }
    // crossing breaks[j]: a positive there leaves, a negative enters
    if (breaks[j].second > 0) {
      if (pos_active > 0) --pos_active;
    } else {
      ++neg_active;
    }
  }
  return best_b;
}

// Exact minimization over a scalar rescaling of w (b fixed): the objective
// is convex piecewise quadratic in the scale c; a sorted sweep keeps the
// active-hinge sums incrementally.
double exact_scale_step(const std::vector<double>& scores,
                        const std::vector<std::uint8_t>& labels, double b,
                        double w_norm_sq, double lambda) {
  const std::size_t n = scores.size();
  if (!(w_norm_sq > 0.0)) return 1.0;
  const double a2 = 0.5 * lambda * w_norm_sq;
  const double inv_n = 1.0 / static_cast<double>(n);

  // hinge_i(c) = max(0, alpha_i - beta_i * c)
  std::vector<double> alpha(n), beta(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = labels[i] ? 1.0 : -1.0;
    alpha[i] = 1.0 - y * b;
    beta[i] = y * scores[i];
  }

  struct Break {
    double c;
    double alpha;
    double beta;
  };
  std::vector<Break> breaks;
  breaks.reserve(n);
  double const_alpha = 0.0;  // samples hinged for every c (beta == 0)
  for (std::size_t i = 0; i < n; ++i) {
    if (beta[i] != 0.0) {
      breaks.push_back({alpha[i] / beta[i], alpha[i], beta[i]});
    } else if (alpha[i] > 0.0) {
      const_alpha += alpha[i];
    }
  }
  std::sort(breaks.begin(), breaks.end(),
            [](const Break& a, const Break& b2) { return a.c < b2.c; });

  const double c_lo = -1e3;
  const double c_hi = 1e3;
  // active sums at c just above c_lo
  double sum_alpha = const_alpha;
  double sum_beta = 0.0;
  for (const Break& br : breaks) {
    if (br.alpha - br.beta * c_lo > 0.0) {
      sum_alpha += br.alpha;
      sum_beta += br.beta;
    }
  }
  auto value_at = [&](double c) {
    return a2 * c * c + inv_n * (sum_alpha - sum_beta * c);
  };

  double best = a2 + inv_n * [&] {  // objective at c = 1 with a direct pass
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += std::max(0.0, alpha[i] - beta[i]);
    }
    return acc;
  }();
  double best_c = 1.0;

  double left = c_lo;
  std::size_t j = 0;
  while (true) {
    const double right = j < breaks.size() ? breaks[j].c : c_hi;
    if (right > left) {
      // interior stationary point of this quadratic piece
      const double c_star = sum_beta * inv_n / (2.0 * a2);
      for (double c : {std::clamp(c_star, left, right), left, right}) {
        const double v = value_at(c);
        if (v < best) {
          best = v;
          best_c = c;
        }
      }
    }
    if (j >= breaks.size()) break;
    // crossing breaks[j]: positive-beta samples leave the active set,
    // negative-beta samples enter
    if (breaks[j].beta > 0.0) {
      sum_alpha -= breaks[j].alpha;
      sum_beta -= breaks[j].beta;
    } else {
      sum_alpha += breaks[j].alpha;
      sum_beta += breaks[j].beta;
    }
    left = right;
    ++j;
  }
  return best_c;
}

}  // namespace

SvmTrainResult train_svm(const Matrix& X, const std::vector<std::uint8_t>& labels,
                         const SvmTrainConfig& cfg) {
  const std::size_t n = X.rows();
  const std::size_t dim = X.cols();
  if (n != labels.size()) {
    throw std::invalid_argument("train_svm: label count mismatch");
  }
  if (n < 2) throw std::invalid_argument("train_svm: needs >= 2 samples");
  if (!(cfg.lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");

  std::size_t n_pos = 0;
  for (std::uint8_t l : labels) n_pos += l ? 1 : 0;
  if (n_pos == 0 || n_pos == n) {
    throw std::invalid_argument(
        "train_svm: single-class input, constant model required");
  }

  SvmTrainResult result;
  std::vector<double>& w = result.model.w;
  w.assign(dim, 0.0);
  double& b = result.model.b;
  b = 0.0;
  result.model.n_samples = n;
  result.model.positive_fraction =
      static_cast<double>(n_pos) / static_cast<double>(n);

  Rng rng(cfg.seed);
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);

  double obj = svm_objective(w, b, X, labels, cfg.lambda);
  result.objective_trace.push_back(obj);

  // Epoch-shuffled subgradient steps on the 1/t schedule explore the
  // direction of w. After each epoch, copies of the iterate and its
  // within-epoch average are polished by exact one-dimensional
  // minimizations over the bias and the norm of w (both convex with
  // closed-form breakpoints), and the best polished candidate becomes the
  // incumbent. The SGD trajectory itself is never touched, so exploration
  // and precision do not fight each other; the reported per-epoch trace is
  // the incumbent objective and nonincreasing by construction.
  std::vector<double> best_w = w;
  double best_b = b;
  std::vector<double> w_avg(dim, 0.0);
  double b_avg = 0.0;
  std::vector<double> scores;
  std::uint64_t step = 0;

  auto polish_candidate = [&](std::vector<double> cw, double cb) {
    compute_scores(cw, X, scores);
    cb = exact_bias_step(scores, labels);
    double norm_sq = 0.0;
    for (double v : cw) norm_sq += v * v;
    const double c = exact_scale_step(scores, labels, cb, norm_sq, cfg.lambda);
    for (auto& v : cw) v *= c;
    for (auto& s : scores) s *= c;
    cb = exact_bias_step(scores, labels);
    const double cand_obj = svm_objective(cw, cb, X, labels, cfg.lambda);
    if (cand_obj < obj) {
      obj = cand_obj;
      best_w = std::move(cw);
      best_b = cb;
    }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    std::fill(w_avg.begin(), w_avg.end(), 0.0);
    b_avg = 0.0;
    for (std::uint32_t idx : order) {
      ++step;
      const double eta =
          cfg.eta0 / (1.0 + cfg.lambda * cfg.eta0 * static_cast<double>(step));
      const double* x = X.row(idx);
      const double y = labels[idx] ? 1.0 : -1.0;
      double margin = b;
      for (std::size_t d = 0; d < dim; ++d) margin += w[d] * x[d];
      const double shrink = 1.0 - std::min(eta * cfg.lambda, 0.5);
      for (std::size_t d = 0; d < dim; ++d) w[d] *= shrink;
      if (y * margin < 1.0) {
        for (std::size_t d = 0; d < dim; ++d) w[d] += eta * y * x[d];
        b += eta * y;
      }
      for (std::size_t d = 0; d < dim; ++d) w_avg[d] += w[d];
      b_avg += b;
    }
    for (std::size_t d = 0; d < dim; ++d) {
      w_avg[d] /= static_cast<double>(n);
    }
    b_avg /= static_cast<double>(n);

    polish_candidate(w, b);
    polish_candidate(w_avg, b_avg);
    result.objective_trace.push_back(obj);
  }
  w = best_w;
  b = best_b;
  result.final_objective = obj;
  return result;
}

}  // namespace mdt
