#pragma once

#include <functional>
#include <utility>

#include "lanegraph/core.hpp"

namespace lanegraph::learning {

// ---------------------------------------------------------------------------
// von Mises mathematics
// ---------------------------------------------------------------------------

struct VonMisesComponent {
  double weight = 0.0;
  double mean = 0.0;   // radians in [0, 2pi)
  double kappa = 0.0;  // concentration, >= 0
};

struct VonMisesMixture {
  std::vector<VonMisesComponent> components;
};

// Modified Bessel function of the first kind, order 0, by power series.
// Throws for x > 700 ("concentration out of supported range").
double bessel_i0(double x);

// Order 1, same series style; needed for d/dkappa of the log-normalizer.
double bessel_i1(double x);

// exp(kappa*cos(theta-mu)) / (2*pi*I0(kappa)).
double vm_pdf(double theta, double mu, double kappa);

double mixture_pdf(double theta, const VonMisesMixture& m);

// Trapezoid approximation of integral p*log(p/q) over [0, 2pi); p is clamped
// below at 1e-12 inside the log only. q must be strictly positive on the
// grid, which holds for any mixture with kappa < 700.
double kl_divergence(const VonMisesMixture& p, const VonMisesMixture& q,
                     int bins);

// ---------------------------------------------------------------------------
// Barrier function loss: L1 over all cells plus alpha * cross entropy
// restricted to known-positive cells. The printed minus sign in front of the
// CE term is read as a positive penalty (CE in the convention sum y_hat*log y);
// flip `positive_ce_penalty` to audit the literal sign.
// ---------------------------------------------------------------------------

struct BarrierLossConfig {
  double alpha = 1e5;
  double eps = 1e-7;       // probability clamp, 0 < eps < 0.5
  double clip_norm = 1.0;  // global L2 bound on the returned gradient
  bool positive_ce_penalty = true;
};

struct BarrierLossResult {
  double loss = 0.0;
  std::vector<double> gradient;  // d loss / d y, post-clip
};

// y values are clamped to [eps, 1-eps] before evaluation; label_mask must be
// exactly 0/1 valued.
BarrierLossResult barrier_loss(const std::vector<double>& y,
                               const std::vector<double>& label_mask,
                               const BarrierLossConfig& cfg);

// ---------------------------------------------------------------------------
// Directional KL loss over a parameterized mixture, in the
// quadrature-differentiable form used by both the loss reporting and the
// mixture fitting. Parameters per component: raw weight (softmax), mean,
// log-kappa; flattened as [w0..wK-1, mu0..muK-1, s0..sK-1].
// ---------------------------------------------------------------------------

struct MixtureParams {
  int k = 0;
  std::vector<double> raw;  // size 3k

  VonMisesMixture mixture() const;
  static MixtureParams from_vector(int k, const std::vector<double>& v);
};

// Mean KL(p(params) || target_mixture_i) over a set of unimodal targets,
// with the exact gradient of the quadrature sum.
struct MixtureObjective {
  double loss = 0.0;
  std::vector<double> gradient;  // wrt MixtureParams::raw
};

MixtureObjective mixture_kl_objective(const MixtureParams& params,
                                      const std::vector<double>& target_means,
                                      double target_kappa, int bins);

// ---------------------------------------------------------------------------
// Per-cell directional loss over a dense field (definitions in oracle.hpp;
// the field is passed via a component accessor to keep this module
// self-contained).
// ---------------------------------------------------------------------------

struct DirectionalCell {
  VonMisesMixture mixture;
  bool labeled = false;
  double label_angle = 0.0;
};

// Mean over labeled cells of KL(pred_cell || unimodal(label_angle, kappa)).
// Errors if a labeled cell has no active component. Empty mask yields 0 and
// records a "no labeled cells" warning.
double directional_loss(const std::vector<DirectionalCell>& cells,
                        double label_kappa, int bins,
                        std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// Gradient checking: central finite differences against an analytic gradient.
// f maps a parameter vector to (value, gradient).
// ---------------------------------------------------------------------------

using DifferentiableFn =
    std::function<std::pair<double, std::vector<double>>(
        const std::vector<double>&)>;

// Returns max over coordinates of |g_fd - g| / (|g_fd| + |g| + 1e-8).
double grad_check(const DifferentiableFn& f, const std::vector<double>& point,
                  double h);

// ---------------------------------------------------------------------------
// Desk-scale per-pixel learner. Three logistic heads (lane, entry, exit) over
// 5x5x2 patches of the input downsampled 2x to label resolution. Exercises
// the barrier loss and the data pipeline end to end.
// ---------------------------------------------------------------------------

struct ToyTrainConfig {
  int patch = 5;
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  double power = 0.9;
  int batch = 28;
  int iters = 20000;
  int checkpoint_every = 2000;
  std::uint64_t seed = 1;
  BarrierLossConfig barrier;
};

struct PixelHead {
  std::vector<double> weights;  // patch*patch*2 inputs
  double bias = 0.0;
};

struct PixelModel {
  int patch = 5;
  PixelHead lane, entry, exit;

  // Prediction for one head at label-resolution pixel (i, j).
  double predict(const PixelHead& head, const GridMap& input_half, int i,
                 int j) const;
  // All three heads across a whole sample; returns a 3x128x128 map.
  GridMap predict_maps(const GridMap& input_half) const;
};

// Downsample a 2x256x256 input to 2x128x128 by 2x2 averaging.
GridMap downsample2(const GridMap& input);

struct ToySample {
  GridMap input_half;  // 2x128x128
  GridMap label;       // 4ch: mask, nx, ny, points (entry+exit blobs)
  std::vector<int> entry_cells;  // label-resolution flat indices
  std::vector<int> exit_cells;
};

struct TrainCheckpoint {
  int iter = 0;
  double loss = 0.0;     // running mean batch loss (lane head)
  double acc_pos = 0.0;  // lane head on held-out eval
  double l1_neg = 0.0;
};

struct ToyTrainResult {
  PixelModel model;
  std::vector<TrainCheckpoint> curve;
};

// Held-out evaluation pair: downsampled input + binary lane eval label.
struct ToyEvalSample {
  GridMap input_half;
  GridMap lane_label;  // 1x128x128 binary
};

double toy_learning_rate(const ToyTrainConfig& cfg, int t);

ToyTrainResult toy_train(const std::vector<ToySample>& dataset,
                         const std::vector<ToyEvalSample>& eval_set,
                         const ToyTrainConfig& cfg);

// ---------------------------------------------------------------------------
// Mixture fitting by gradient descent on the softmax/mean/log-kappa
// parameterization; deterministic given seed.
// ---------------------------------------------------------------------------

struct FitConfig {
  int iters = 800;
  double lr = 0.05;
  int bins = 256;
  double target_kappa = 8.0;
  std::uint64_t seed = 1;
};

VonMisesMixture fit_vm_mixture(const std::vector<double>& sample_angles, int k,
                               const FitConfig& cfg);

// Fit trace for convergence checks: kappa of component 0 per iteration.
std::vector<double> fit_vm_kappa_trace(const std::vector<double>& sample_angles,
                                       int k, const FitConfig& cfg);

}  // namespace lanegraph::learning
