#include "lanegraph/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lanegraph::learning {

double bessel_i0(double x) {
  if (x > 700.0) throw std::runtime_error("concentration out of supported range");
  // sum_{k>=0} (x^2/4)^k / (k!)^2, terminated when a term < 1e-16 * sum.
  double q = x * x / 4.0;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 10000; ++k) {
    term *= q / (double(k) * double(k));
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

double bessel_i1(double x) {
  if (x > 700.0) throw std::runtime_error("concentration out of supported range");
  double q = x * x / 4.0;
  double term = x / 2.0;
  double sum = term;
  for (int k = 1; k < 10000; ++k) {
    term *= q / (double(k) * double(k + 1));
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

double vm_pdf(double theta, double mu, double kappa) {
  return std::exp(kappa * std::cos(theta - mu)) / (kTwoPi * bessel_i0(kappa));
}

double mixture_pdf(double theta, const VonMisesMixture& m) {
  double p = 0.0;
  for (const auto& c : m.components) {
    if (c.weight <= 0.0) continue;
    p += c.weight * vm_pdf(theta, c.mean, c.kappa);
  }
  return p;
}

double kl_divergence(const VonMisesMixture& p, const VonMisesMixture& q,
                     int bins) {
  if (bins < 64) throw std::invalid_argument("kl_divergence needs bins >= 64");
  // Periodic integrand: the trapezoid over a full period reduces to the
  // rectangle sum.
  const double dt = kTwoPi / bins;
  double acc = 0.0;
  for (int b = 0; b < bins; ++b) {
    double theta = b * dt;
    double pv = mixture_pdf(theta, p);
    double qv = mixture_pdf(theta, q);
    acc += pv * (std::log(std::max(pv, 1e-12)) - std::log(qv));
  }
  return acc * dt;
}

// ---------------------------------------------------------------------------
// Barrier loss
// ---------------------------------------------------------------------------

BarrierLossResult barrier_loss(const std::vector<double>& y,
                               const std::vector<double>& label_mask,
                               const BarrierLossConfig& cfg) {
  if (y.size() != label_mask.size()) {
    throw std::invalid_argument("barrier_loss: size mismatch");
  }
  if (!(cfg.alpha > 0.0) || !(cfg.eps > 0.0 && cfg.eps < 0.5)) {
    throw std::invalid_argument("barrier_loss: bad config");
  }
  const double n = double(y.size());
  const double ce_sign = cfg.positive_ce_penalty ? 1.0 : -1.0;
  BarrierLossResult r;
  r.gradient.assign(y.size(), 0.0);
  double loss = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    double mask = label_mask[k];
    if (mask != 0.0 && mask != 1.0) {
      throw std::invalid_argument("barrier_loss: mask value outside {0,1}");
    }
    double v = std::clamp(y[k], cfg.eps, 1.0 - cfg.eps);
    loss += std::fabs(mask - v);
    double g = v > mask ? 1.0 : (v < mask ? -1.0 : 0.0);
    if (mask == 1.0) {
      loss += ce_sign * cfg.alpha * (-std::log(v));
      g += ce_sign * cfg.alpha * (-1.0 / v);
    }
    r.gradient[k] = g / n;
  }
  r.loss = loss / n;
  double sq = 0.0;
  for (double g : r.gradient) sq += g * g;
  double gn = std::sqrt(sq);
  if (gn > cfg.clip_norm && gn > 0.0) {
    double s = cfg.clip_norm / gn;
    for (double& g : r.gradient) g *= s;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Parameterized mixtures and the quadrature-differentiable KL objective
// ---------------------------------------------------------------------------

VonMisesMixture MixtureParams::mixture() const {
  VonMisesMixture m;
  double zmax = -1e300;
  for (int c = 0; c < k; ++c) zmax = std::max(zmax, raw[c]);
  double denom = 0.0;
  for (int c = 0; c < k; ++c) denom += std::exp(raw[c] - zmax);
  for (int c = 0; c < k; ++c) {
    VonMisesComponent vc;
    vc.weight = std::exp(raw[c] - zmax) / denom;
    vc.mean = wrap_angle(raw[k + c]);
    vc.kappa = std::exp(raw[2 * k + c]);
    m.components.push_back(vc);
  }
  return m;
}

MixtureParams MixtureParams::from_vector(int k, const std::vector<double>& v) {
  MixtureParams p;
  p.k = k;
  p.raw = v;
  return p;
}

MixtureObjective mixture_kl_objective(const MixtureParams& params,
                                      const std::vector<double>& target_means,
                                      double target_kappa, int bins) {
  const int k = params.k;
  const double dt = kTwoPi / bins;

  // Softmax weights and per-component densities on the bin grid.
  std::vector<double> w(k), mu(k), kap(k);
  {
    double zmax = -1e300;
    for (int c = 0; c < k; ++c) zmax = std::max(zmax, params.raw[c]);
    double denom = 0.0;
    for (int c = 0; c < k; ++c) denom += std::exp(params.raw[c] - zmax);
    for (int c = 0; c < k; ++c) {
      w[c] = std::exp(params.raw[c] - zmax) / denom;
      mu[c] = params.raw[k + c];
      kap[c] = std::exp(params.raw[2 * k + c]);
    }
  }

  // Mean log target density over the targets, precomputed per bin:
  // mean_i log vm(theta; m_i, kt). KL mean = int p (log p - mean_i log q_i).
  std::vector<double> mean_log_q(bins, 0.0);
  const double log_norm_t = std::log(kTwoPi * bessel_i0(target_kappa));
  for (int b = 0; b < bins; ++b) {
    double theta = b * dt;
    double acc = 0.0;
    for (double m : target_means) {
      acc += target_kappa * std::cos(theta - m) - log_norm_t;
    }
    mean_log_q[b] = acc / double(target_means.size());
  }

  std::vector<double> comp(std::size_t(k) * bins);
  std::vector<double> p(bins, 0.0);
  std::vector<double> ratio(k);  // I1/I0 per component
  for (int c = 0; c < k; ++c) {
    double i0 = bessel_i0(kap[c]);
    ratio[c] = bessel_i1(kap[c]) / i0;
    double log_norm = std::log(kTwoPi * i0);
    for (int b = 0; b < bins; ++b) {
      double theta = b * dt;
      double v = std::exp(kap[c] * std::cos(theta - mu[c]) - log_norm);
      comp[std::size_t(c) * bins + b] = v;
      p[b] += w[c] * v;
    }
  }

  MixtureObjective out;
  out.gradient.assign(std::size_t(3) * k, 0.0);
  double loss = 0.0;
  std::vector<double> dl_dp(bins);
  for (int b = 0; b < bins; ++b) {
    double pv = std::max(p[b], 1e-12);
    double lg = std::log(pv) - mean_log_q[b];
    loss += p[b] * lg;
    // d/dp of p*(log max(p,c) - q): log term plus p/p when above the clamp.
    dl_dp[b] = lg + (p[b] > 1e-12 ? 1.0 : 0.0);
  }
  out.loss = loss * dt;

  for (int c = 0; c < k; ++c) {
    double gw = 0.0, gm = 0.0, gs = 0.0;
    for (int b = 0; b < bins; ++b) {
      double theta = b * dt;
      double vc = comp[std::size_t(c) * bins + b];
      // dp/d raw_w_c with softmax: w_c * (vm_c - p).
      gw += dl_dp[b] * w[c] * (vc - p[b]);
      gm += dl_dp[b] * w[c] * vc * kap[c] * std::sin(theta - mu[c]);
      // d vm/d kappa = vm * (cos(theta-mu) - I1/I0); chain through exp(s).
      gs += dl_dp[b] * w[c] * vc * (std::cos(theta - mu[c]) - ratio[c]) * kap[c];
    }
    out.gradient[c] = gw * dt;
    out.gradient[k + c] = gm * dt;
    out.gradient[2 * k + c] = gs * dt;
  }
  return out;
}

double directional_loss(const std::vector<DirectionalCell>& cells,
                        double label_kappa, int bins,
                        std::vector<std::string>* warnings) {
  double acc = 0.0;
  int labeled = 0;
  for (const auto& cell : cells) {
    if (!cell.labeled) continue;
    double total = 0.0;
    for (const auto& c : cell.mixture.components) total += c.weight;
    if (total <= 0.0) {
      throw std::runtime_error("undefined direction prediction on labeled cell");
    }
    VonMisesMixture target;
    target.components.push_back({1.0, wrap_angle(cell.label_angle), label_kappa});
    acc += kl_divergence(cell.mixture, target, bins);
    ++labeled;
  }
  if (labeled == 0) {
    if (warnings) warnings->push_back("no labeled cells");
    return 0.0;
  }
  return acc / labeled;
}

double grad_check(const DifferentiableFn& f, const std::vector<double>& point,
                  double h) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: h must be > 0");
  auto [value, grad] = f(point);
  (void)value;
  double worst = 0.0;
  std::vector<double> x = point;
  for (std::size_t d = 0; d < point.size(); ++d) {
    x[d] = point[d] + h;
    double fp = f(x).first;
    x[d] = point[d] - h;
    double fm = f(x).first;
    x[d] = point[d];
    double fd = (fp - fm) / (2.0 * h);
    double rel = std::fabs(fd - grad[d]) / (std::fabs(fd) + std::fabs(grad[d]) + 1e-8);
    worst = std::max(worst, rel);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Toy learner
// ---------------------------------------------------------------------------

GridMap downsample2(const GridMap& input) {
  GridMap out = GridMap::zeros(input.channels, input.height / 2, input.width / 2);
  for (int c = 0; c < input.channels; ++c) {
    for (int i = 0; i < out.height; ++i) {
      for (int j = 0; j < out.width; ++j) {
        double s = input.at(c, 2 * i, 2 * j) + input.at(c, 2 * i + 1, 2 * j) +
                   input.at(c, 2 * i, 2 * j + 1) +
                   input.at(c, 2 * i + 1, 2 * j + 1);
        out.at(c, i, j) = s / 4.0;
      }
    }
  }
  return out;
}

namespace {

double head_logit(const PixelHead& head, const GridMap& input_half, int patch,
                  int i, int j) {
  const int r = patch / 2;
  double z = head.bias;
  int f = 0;
  for (int c = 0; c < 2; ++c) {
    for (int di = -r; di <= r; ++di) {
      for (int dj = -r; dj <= r; ++dj, ++f) {
        int ii = i + di, jj = j + dj;
        if (ii < 0 || jj < 0 || ii >= input_half.height || jj >= input_half.width)
          continue;
        z += head.weights[f] * input_half.at(c, ii, jj);
      }
    }
  }
  return z;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double PixelModel::predict(const PixelHead& head, const GridMap& input_half,
                           int i, int j) const {
  return sigmoid(head_logit(head, input_half, patch, i, j));
}

GridMap PixelModel::predict_maps(const GridMap& input_half) const {
  GridMap out = GridMap::zeros(3, input_half.height, input_half.width);
  const PixelHead* heads[3] = {&lane, &entry, &exit};
  for (int h = 0; h < 3; ++h) {
    for (int i = 0; i < out.height; ++i) {
      for (int j = 0; j < out.width; ++j) {
        out.at(h, i, j) = predict(*heads[h], input_half, i, j);
      }
    }
  }
  return out;
}

double toy_learning_rate(const ToyTrainConfig& cfg, int t) {
  double frac = cfg.iters > 0 ? double(t) / double(cfg.iters) : 1.0;
  frac = std::clamp(frac, 0.0, 1.0);
  return cfg.lr_end + (cfg.lr_start - cfg.lr_end) * std::pow(1.0 - frac, cfg.power);
}

namespace {

struct HeadState {
  PixelHead* head;
  // positive-pixel pools per sample
  const std::vector<std::vector<int>>* positives;
};

// Per-pixel barrier gradient wrt the logit; returns (loss, dL/dz) with y
// clamped for the loss while the chain rule runs through the raw sigmoid.
std::pair<double, double> pixel_barrier(double z, bool positive,
                                        const BarrierLossConfig& cfg) {
  double y = sigmoid(z);
  double yc = std::clamp(y, cfg.eps, 1.0 - cfg.eps);
  double sp = y * (1.0 - y);
  if (positive) {
    double loss = (1.0 - yc) + cfg.alpha * (-std::log(yc));
    double dldy = -1.0 - cfg.alpha / yc;
    return {loss, dldy * sp};
  }
  double loss = yc;
  return {loss, 1.0 * sp};
}

void eval_model(const PixelModel& model, const std::vector<ToyEvalSample>& evals,
                double* acc_pos, double* l1_neg) {
  long long pos_total = 0, pos_hit = 0;
  double neg_sum = 0.0;
  long long neg_total = 0;
  for (const auto& ev : evals) {
    for (int i = 0; i < ev.lane_label.height; ++i) {
      for (int j = 0; j < ev.lane_label.width; ++j) {
        double y = model.predict(model.lane, ev.input_half, i, j);
        if (ev.lane_label.at(0, i, j) > 0.5) {
          ++pos_total;
          if (y > 0.5) ++pos_hit;
        } else {
          neg_sum += y;
          ++neg_total;
        }
      }
    }
  }
  *acc_pos = pos_total > 0 ? double(pos_hit) / double(pos_total) : 1.0;
  *l1_neg = neg_total > 0 ? neg_sum / double(neg_total) : 0.0;
}

}  // namespace

ToyTrainResult toy_train(const std::vector<ToySample>& dataset,
                         const std::vector<ToyEvalSample>& eval_set,
                         const ToyTrainConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("toy_train: empty dataset");
  const int feat = cfg.patch * cfg.patch * 2;

  ToyTrainResult result;
  result.model.patch = cfg.patch;
  result.model.lane.weights.assign(feat, 0.0);
  result.model.entry.weights.assign(feat, 0.0);
  result.model.exit.weights.assign(feat, 0.0);

  // Positive pools per head per sample.
  std::vector<std::vector<int>> lane_pos(dataset.size());
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    const GridMap& lbl = dataset[s].label;
    for (int i = 0; i < lbl.height; ++i) {
      for (int j = 0; j < lbl.width; ++j) {
        if (lbl.at(0, i, j) > 0.5) lane_pos[s].push_back(i * lbl.width + j);
      }
    }
  }

  Rng rng(cfg.seed);
  const int r = cfg.patch / 2;
  std::vector<double> grad(feat + 1);
  double running_loss = 0.0;
  int running_count = 0;

  auto checkpoint = [&](int iter) {
    TrainCheckpoint cp;
    cp.iter = iter;
    cp.loss = running_count > 0 ? running_loss / running_count : 0.0;
    eval_model(result.model, eval_set, &cp.acc_pos, &cp.l1_neg);
    result.curve.push_back(cp);
    running_loss = 0.0;
    running_count = 0;
  };

  checkpoint(0);

  struct HeadRef {
    PixelHead* head;
    int label_source;  // 0 lane mask, 1 entry cells, 2 exit cells
  };
  HeadRef heads[3] = {{&result.model.lane, 0},
                      {&result.model.entry, 1},
                      {&result.model.exit, 2}};

  for (int t = 0; t < cfg.iters; ++t) {
    double lr = toy_learning_rate(cfg, t);
    for (auto& hr : heads) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (int b = 0; b < cfg.batch; ++b) {
        int s = int(rng.uniform_int(0, std::int64_t(dataset.size()) - 1));
        const ToySample& sample = dataset[std::size_t(s)];
        const GridMap& lbl = sample.label;
        const int w = lbl.width;

        const std::vector<int>* pool = nullptr;
        if (hr.label_source == 0) pool = &lane_pos[std::size_t(s)];
        if (hr.label_source == 1) pool = &sample.entry_cells;
        if (hr.label_source == 2) pool = &sample.exit_cells;

        int flat;
        if (!pool->empty() && rng.real01() < 0.5) {
          flat = (*pool)[std::size_t(rng.uniform_int(0, std::int64_t(pool->size()) - 1))];
        } else {
          flat = int(rng.uniform_int(0, std::int64_t(lbl.height) * w - 1));
        }
        int pi = flat / w, pj = flat % w;

        bool positive;
        if (hr.label_source == 0) {
          positive = lbl.at(0, pi, pj) > 0.5;
        } else {
          const std::vector<int>& cells =
              hr.label_source == 1 ? sample.entry_cells : sample.exit_cells;
          positive = std::binary_search(cells.begin(), cells.end(), flat);
        }

        double z = head_logit(*hr.head, sample.input_half, cfg.patch, pi, pj);
        auto [loss, dldz] = pixel_barrier(z, positive, cfg.barrier);
        batch_loss += loss;

        int f = 0;
        for (int c = 0; c < 2; ++c) {
          for (int di = -r; di <= r; ++di) {
            for (int dj = -r; dj <= r; ++dj, ++f) {
              int ii = pi + di, jj = pj + dj;
              if (ii < 0 || jj < 0 || ii >= sample.input_half.height ||
                  jj >= sample.input_half.width)
                continue;
              grad[std::size_t(f)] += dldz * sample.input_half.at(c, ii, jj);
            }
          }
        }
        grad[std::size_t(feat)] += dldz;
      }
      for (double& g : grad) g /= cfg.batch;
      double sq = 0.0;
      for (double g : grad) sq += g * g;
      double gn = std::sqrt(sq);
      double scale = gn > cfg.barrier.clip_norm && gn > 0.0
                         ? cfg.barrier.clip_norm / gn
                         : 1.0;
      for (int f = 0; f < feat; ++f) hr.head->weights[std::size_t(f)] -= lr * scale * grad[std::size_t(f)];
      hr.head->bias -= lr * scale * grad[std::size_t(feat)];
      if (hr.label_source == 0) {
        running_loss += batch_loss / cfg.batch;
        ++running_count;
      }
    }
    if ((t + 1) % cfg.checkpoint_every == 0 || t + 1 == cfg.iters) {
      checkpoint(t + 1);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Mixture fitting
// ---------------------------------------------------------------------------

namespace {

MixtureParams fit_init(const std::vector<double>& sample_angles, int k,
                       std::uint64_t seed) {
  Rng rng(seed);
  MixtureParams p;
  p.k = k;
  p.raw.assign(std::size_t(3) * k, 0.0);
  // Means: spread around the circular mean of the data.
  double sx = 0.0, sy = 0.0;
  for (double a : sample_angles) {
    sx += std::cos(a);
    sy += std::sin(a);
  }
  double base = std::atan2(sy, sx);
  for (int c = 0; c < k; ++c) {
    p.raw[std::size_t(k + c)] =
        wrap_angle(base + c * kTwoPi / std::max(1, k) + 0.01 * rng.normal());
    p.raw[std::size_t(2 * k + c)] = std::log(2.0);  // kappa init 2
  }
  return p;
}

}  // namespace

VonMisesMixture fit_vm_mixture(const std::vector<double>& sample_angles, int k,
                               const FitConfig& cfg) {
  if (sample_angles.empty()) {
    throw std::invalid_argument("fit_vm_mixture: need at least one sample");
  }
  MixtureParams p = fit_init(sample_angles, k, cfg.seed);
  for (int t = 0; t < cfg.iters; ++t) {
    MixtureObjective obj =
        mixture_kl_objective(p, sample_angles, cfg.target_kappa, cfg.bins);
    for (std::size_t d = 0; d < p.raw.size(); ++d) {
      p.raw[d] -= cfg.lr * obj.gradient[d];
    }
    // Keep kappa in the supported range of the Bessel series.
    for (int c = 0; c < k; ++c) {
      p.raw[std::size_t(2 * k + c)] = std::min(p.raw[std::size_t(2 * k + c)], std::log(600.0));
    }
  }
  return p.mixture();
}

std::vector<double> fit_vm_kappa_trace(const std::vector<double>& sample_angles,
                                       int k, const FitConfig& cfg) {
  MixtureParams p = fit_init(sample_angles, k, cfg.seed);
  std::vector<double> trace;
  trace.reserve(std::size_t(cfg.iters));
  for (int t = 0; t < cfg.iters; ++t) {
    trace.push_back(std::exp(p.raw[std::size_t(2 * k)]));
    MixtureObjective obj =
        mixture_kl_objective(p, sample_angles, cfg.target_kappa, cfg.bins);
    for (std::size_t d = 0; d < p.raw.size(); ++d) {
      p.raw[d] -= cfg.lr * obj.gradient[d];
    }
    for (int c = 0; c < k; ++c) {
      p.raw[std::size_t(2 * k + c)] = std::min(p.raw[std::size_t(2 * k + c)], std::log(600.0));
    }
  }
  return trace;
}

}  // namespace lanegraph::learning
