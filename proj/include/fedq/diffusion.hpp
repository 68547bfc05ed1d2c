#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fedq/errors.hpp"
#include "fedq/rng.hpp"
#include "fedq/types.hpp"

namespace fedq {

/// Variance schedule of the forward noising chain. Index t-1 holds
/// the step-t values; alpha_bars is the running product of
/// 1 - beta.
struct Schedule {
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  int steps() const noexcept { return static_cast<int>(betas.size()); }
};

/// Evenly spaced betas from beta_first to beta_last. Requires
/// steps >= 1 and 0 < beta_first <= beta_last < 1; throws
/// InvalidSchedule otherwise.
Schedule linear_schedule(int steps, double beta_first, double beta_last);

/// Layer widths of the noise predictor: a fully connected tanh
/// network from (point, sinusoidal time embedding) to a predicted
/// noise vector.
struct NoiseModelArch {
  int time_embed = 16;  ///< Even number of embedding channels.
  int hidden1 = 64;
  int hidden2 = 64;

  int input_dim() const noexcept { return 2 + time_embed; }
  int param_count() const noexcept {
    return input_dim() * hidden1 + hidden1 + hidden1 * hidden2 + hidden2 + hidden2 * 2 + 2;
  }
  bool operator==(const NoiseModelArch&) const = default;
};

/// The noise predictor with its flat parameter vector. Layout:
/// [W1 | b1 | W2 | b2 | W3 | b3], each W stored row-major with the
/// input index as the row.
class NoiseModel {
 public:
  /// Glorot-uniform weights, zero biases, reproducible from the seed.
  NoiseModel(const NoiseModelArch& arch, std::uint64_t init_seed);

  /// Adopt an existing parameter vector; throws ShapeError on a size
  /// mismatch.
  NoiseModel(const NoiseModelArch& arch, WeightVector weights);

  const NoiseModelArch& arch() const noexcept { return arch_; }
  const WeightVector& weights() const noexcept { return w_; }
  void set_weights(WeightVector w);

  /// Predicted noise for a point at timestep t (1-based).
  Point2 predict(const Point2& x, int t) const;

 private:
  NoiseModelArch arch_;
  WeightVector w_;
};

/// One training batch: clean points, timesteps (1-based), and the
/// noise realizations injected at those steps.
struct Batch {
  std::vector<Point2> x0;
  std::vector<int> t;
  std::vector<Point2> eps;

  std::size_t size() const noexcept { return x0.size(); }
};

/// Draw batch_size (point, timestep, noise) triples with replacement.
/// Throws TooFewSamples on an empty dataset.
Batch make_batch(const std::vector<Point2>& data, int batch_size, int steps, Rng& rng);

/// Close the noising chain at step t in one jump:
///   x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
/// Throws ShapeError for t outside [1, steps].
Point2 diffuse_forward(const Point2& x0, int t, const Point2& eps, const Schedule& sched);

/// Mean squared noise-prediction error over the batch.
double batch_loss(const NoiseModel& model, const Batch& batch, const Schedule& sched);

struct LossGrad {
  double loss = 0.0;
  WeightVector grad;
};

/// Loss plus its exact gradient with respect to every parameter,
/// accumulated over the batch in a fixed order. Throws
/// NumericalOverflow when activations leave the finite range.
LossGrad loss_and_grad(const NoiseModel& model, const Batch& batch, const Schedule& sched);

/// In-place step w -= lr * grad; throws ShapeError on a size
/// mismatch.
void sgd_step(NoiseModel& model, const WeightVector& grad, double lr);

/// Any noise predictor; lets the reverse chain run against a closed
/// form in tests.
using Predictor = std::function<Point2(const Point2&, int)>;

/// Run the reverse chain from x at the final step down to step 1.
/// With rng null the injected noise is zero and the path is the
/// deterministic skeleton of the sampler; no noise is injected at the
/// final step either way.
Point2 denoise_path(const Predictor& predict, const Schedule& sched, Point2 x, Rng* rng);

/// Draw `count` points by running the reverse chain from Gaussian
/// noise. Point i depends only on (seed, i), so any subset can be
/// reproduced independently.
std::vector<Point2> sample(const NoiseModel& model, const Schedule& sched, int count,
                           std::uint64_t seed);

/// Balanced Gaussian mixture on a ring: mode j of `modes` sits at
/// angle 2 pi j / modes and radius `radius` with isotropic deviation
/// `stddev`; point i belongs to mode i % modes.
std::vector<Point2> make_mixture_dataset(int count, int modes, double radius, double stddev,
                                         Rng& rng);

}  // namespace fedq
