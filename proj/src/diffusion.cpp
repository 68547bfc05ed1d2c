#include "fedq/diffusion.hpp"

#include <cmath>
#include <string>

namespace fedq {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_arch(const NoiseModelArch& arch) {
  if (arch.time_embed < 2 || arch.time_embed % 2 != 0 || arch.hidden1 < 1 ||
      arch.hidden2 < 1) {
    throw ShapeError("invalid noise model architecture");
  }
}

void check_timestep(const Schedule& sched, int t) {
  if (t < 1 || t > sched.steps()) {
    throw ShapeError("timestep " + std::to_string(t) + " outside [1, " +
                     std::to_string(sched.steps()) + "]");
  }
}

void embed_time(int t, int dim, double* out) {
  for (int j = 0; j < dim / 2; ++j) {
    const double freq = std::pow(10000.0, -2.0 * j / dim);
    out[2 * j] = std::sin(t * freq);
    out[2 * j + 1] = std::cos(t * freq);
  }
}

// Activations of one forward pass, kept for backpropagation.
struct Activations {
  std::vector<double> in;
  std::vector<double> h1;
  std::vector<double> h2;
  Point2 out;
};

void forward_pass(const NoiseModelArch& arch, const WeightVector& w, const Point2& x, int t,
                  Activations& act) {
  const int ni = arch.input_dim();
  const int n1 = arch.hidden1;
  const int n2 = arch.hidden2;
  const double* w1 = w.data();
  const double* b1 = w1 + ni * n1;
  const double* w2 = b1 + n1;
  const double* b2 = w2 + n1 * n2;
  const double* w3 = b2 + n2;
  const double* b3 = w3 + n2 * 2;

  act.in.resize(ni);
  act.in[0] = x[0];
  act.in[1] = x[1];
  embed_time(t, arch.time_embed, act.in.data() + 2);

  act.h1.assign(n1, 0.0);
  for (int i = 0; i < ni; ++i) {
    const double v = act.in[i];
    const double* row = w1 + i * n1;
    for (int j = 0; j < n1; ++j) act.h1[j] += v * row[j];
  }
  for (int j = 0; j < n1; ++j) act.h1[j] = std::tanh(act.h1[j] + b1[j]);

  act.h2.assign(n2, 0.0);
  for (int i = 0; i < n1; ++i) {
    const double v = act.h1[i];
    const double* row = w2 + i * n2;
    for (int j = 0; j < n2; ++j) act.h2[j] += v * row[j];
  }
  for (int j = 0; j < n2; ++j) act.h2[j] = std::tanh(act.h2[j] + b2[j]);

  act.out = {b3[0], b3[1]};
  for (int i = 0; i < n2; ++i) {
    act.out[0] += act.h2[i] * w3[i * 2];
    act.out[1] += act.h2[i] * w3[i * 2 + 1];
  }
}

}  // namespace

Schedule linear_schedule(int steps, double beta_first, double beta_last) {
  if (steps < 1) throw InvalidSchedule("need at least one step");
  if (!(beta_first > 0.0) || !(beta_last < 1.0) || !(beta_first <= beta_last)) {
    throw InvalidSchedule("betas must satisfy 0 < beta_first <= beta_last < 1");
  }
  Schedule sched;
  sched.betas.resize(steps);
  sched.alphas.resize(steps);
  sched.alpha_bars.resize(steps);
  double bar = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    sched.betas[i] = beta_first + (beta_last - beta_first) * frac;
    sched.alphas[i] = 1.0 - sched.betas[i];
    bar *= sched.alphas[i];
    sched.alpha_bars[i] = bar;
  }
  return sched;
}

NoiseModel::NoiseModel(const NoiseModelArch& arch, std::uint64_t init_seed) : arch_(arch) {
  check_arch(arch_);
  w_.assign(arch_.param_count(), 0.0);
  Rng rng(init_seed);
  const auto fill = [&](std::size_t offset, int rows, int cols) {
    const double bound = std::sqrt(6.0 / (rows + cols));
    for (int i = 0; i < rows * cols; ++i) w_[offset + i] = rng.uniform(-bound, bound);
    return offset + static_cast<std::size_t>(rows) * cols + cols;  // skip zero biases
  };
  std::size_t at = fill(0, arch_.input_dim(), arch_.hidden1);
  at = fill(at, arch_.hidden1, arch_.hidden2);
  fill(at, arch_.hidden2, 2);
}

NoiseModel::NoiseModel(const NoiseModelArch& arch, WeightVector weights)
    : arch_(arch), w_(std::move(weights)) {
  check_arch(arch_);
  if (w_.size() != static_cast<std::size_t>(arch_.param_count())) {
    throw ShapeError("expected " + std::to_string(arch_.param_count()) + " weights, got " +
                     std::to_string(w_.size()));
  }
}

void NoiseModel::set_weights(WeightVector w) {
  if (w.size() != w_.size()) {
    throw ShapeError("expected " + std::to_string(w_.size()) + " weights, got " +
                     std::to_string(w.size()));
  }
  w_ = std::move(w);
}

Point2 NoiseModel::predict(const Point2& x, int t) const {
  Activations act;
  forward_pass(arch_, w_, x, t, act);
  return act.out;
}

Batch make_batch(const std::vector<Point2>& data, int batch_size, int steps, Rng& rng) {
  if (data.empty()) throw TooFewSamples("dataset is empty");
  if (batch_size < 1) throw ShapeError("batch size must be positive");
  if (steps < 1) throw InvalidSchedule("need at least one step");
  Batch batch;
  batch.x0.reserve(batch_size);
  batch.t.reserve(batch_size);
  batch.eps.reserve(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    batch.x0.push_back(data[rng.uniform_int(data.size())]);
    batch.t.push_back(1 + static_cast<int>(rng.uniform_int(steps)));
    batch.eps.push_back({rng.normal(), rng.normal()});
  }
  return batch;
}

Point2 diffuse_forward(const Point2& x0, int t, const Point2& eps, const Schedule& sched) {
  check_timestep(sched, t);
  const double bar = sched.alpha_bars[t - 1];
  const double keep = std::sqrt(bar);
  const double mix = std::sqrt(1.0 - bar);
  return {keep * x0[0] + mix * eps[0], keep * x0[1] + mix * eps[1]};
}

double batch_loss(const NoiseModel& model, const Batch& batch, const Schedule& sched) {
  if (batch.size() == 0 || batch.t.size() != batch.size() || batch.eps.size() != batch.size()) {
    throw ShapeError("batch fields must be non-empty and equally sized");
  }
  double loss = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Point2 xt = diffuse_forward(batch.x0[s], batch.t[s], batch.eps[s], sched);
    const Point2 out = model.predict(xt, batch.t[s]);
    const double rx = out[0] - batch.eps[s][0];
    const double ry = out[1] - batch.eps[s][1];
    loss += rx * rx + ry * ry;
  }
  loss /= static_cast<double>(batch.size());
  if (!std::isfinite(loss)) throw NumericalOverflow("loss is not finite");
  return loss;
}

LossGrad loss_and_grad(const NoiseModel& model, const Batch& batch, const Schedule& sched) {
  if (batch.size() == 0 || batch.t.size() != batch.size() || batch.eps.size() != batch.size()) {
    throw ShapeError("batch fields must be non-empty and equally sized");
  }
  const NoiseModelArch& arch = model.arch();
  const WeightVector& w = model.weights();
  const int ni = arch.input_dim();
  const int n1 = arch.hidden1;
  const int n2 = arch.hidden2;
  const double* w2 = w.data() + ni * n1 + n1;
  const double* w3 = w2 + n1 * n2 + n2;

  LossGrad result;
  result.grad.assign(w.size(), 0.0);
  double* g1 = result.grad.data();
  double* gb1 = g1 + ni * n1;
  double* g2 = gb1 + n1;
  double* gb2 = g2 + n1 * n2;
  double* g3 = gb2 + n2;
  double* gb3 = g3 + n2 * 2;

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Activations act;
  std::vector<double> dh2(n2), dp2(n2), dh1(n1), dp1(n1);

  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Point2 xt = diffuse_forward(batch.x0[s], batch.t[s], batch.eps[s], sched);
    forward_pass(arch, w, xt, batch.t[s], act);
    const double rx = act.out[0] - batch.eps[s][0];
    const double ry = act.out[1] - batch.eps[s][1];
    result.loss += (rx * rx + ry * ry) * inv_n;

    const double dox = 2.0 * rx * inv_n;
    const double doy = 2.0 * ry * inv_n;
    gb3[0] += dox;
    gb3[1] += doy;
    for (int i = 0; i < n2; ++i) {
      g3[i * 2] += act.h2[i] * dox;
      g3[i * 2 + 1] += act.h2[i] * doy;
      dh2[i] = w3[i * 2] * dox + w3[i * 2 + 1] * doy;
    }
    for (int j = 0; j < n2; ++j) dp2[j] = dh2[j] * (1.0 - act.h2[j] * act.h2[j]);
    for (int j = 0; j < n2; ++j) gb2[j] += dp2[j];
    for (int i = 0; i < n1; ++i) {
      const double v = act.h1[i];
      double acc = 0.0;
      const double* row = w2 + i * n2;
      double* grow = g2 + i * n2;
      for (int j = 0; j < n2; ++j) {
        grow[j] += v * dp2[j];
        acc += row[j] * dp2[j];
      }
      dh1[i] = acc;
    }
    for (int j = 0; j < n1; ++j) dp1[j] = dh1[j] * (1.0 - act.h1[j] * act.h1[j]);
    for (int j = 0; j < n1; ++j) gb1[j] += dp1[j];
    for (int i = 0; i < ni; ++i) {
      const double v = act.in[i];
      double* grow = g1 + i * n1;
      for (int j = 0; j < n1; ++j) grow[j] += v * dp1[j];
    }
  }
  if (!std::isfinite(result.loss)) throw NumericalOverflow("loss is not finite");
  return result;
}

void sgd_step(NoiseModel& model, const WeightVector& grad, double lr) {
  if (grad.size() != model.weights().size()) {
    throw ShapeError("gradient size " + std::to_string(grad.size()) +
                     " does not match the model");
  }
  WeightVector w = model.weights();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * grad[i];
  model.set_weights(std::move(w));
}

Point2 denoise_path(const Predictor& predict, const Schedule& sched, Point2 x, Rng* rng) {
  if (sched.steps() < 1) throw InvalidSchedule("need at least one step");
  for (int t = sched.steps(); t >= 1; --t) {
    const double alpha = sched.alphas[t - 1];
    const double bar = sched.alpha_bars[t - 1];
    const Point2 eps_hat = predict(x, t);
    const double scale = sched.betas[t - 1] / std::sqrt(1.0 - bar);
    const double inv_root = 1.0 / std::sqrt(alpha);
    x[0] = inv_root * (x[0] - scale * eps_hat[0]);
    x[1] = inv_root * (x[1] - scale * eps_hat[1]);
    if (t > 1) {
      const double sigma = std::sqrt(sched.betas[t - 1]);
      const double zx = rng ? rng->normal() : 0.0;
      const double zy = rng ? rng->normal() : 0.0;
      x[0] += sigma * zx;
      x[1] += sigma * zy;
    }
    if (!std::isfinite(x[0]) || !std::isfinite(x[1])) {
      throw NumericalOverflow("reverse chain diverged at step " + std::to_string(t));
    }
  }
  return x;
}

std::vector<Point2> sample(const NoiseModel& model, const Schedule& sched, int count,
                           std::uint64_t seed) {
  if (count < 0) throw ShapeError("sample count must be non-negative");
  const Predictor predict = [&](const Point2& x, int t) { return model.predict(x, t); };
  std::vector<Point2> points;
  points.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    Point2 x{rng.normal(), rng.normal()};
    points.push_back(denoise_path(predict, sched, x, &rng));
  }
  return points;
}

std::vector<Point2> make_mixture_dataset(int count, int modes, double radius, double stddev,
                                         Rng& rng) {
  if (count < 1) throw TooFewSamples("dataset size must be positive");
  if (modes < 1) throw ShapeError("mode count must be positive");
  if (!(radius >= 0.0) || !(stddev >= 0.0)) throw Error("radius and stddev must be non-negative");
  std::vector<Point2> points;
  points.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double ang = kTwoPi * (i % modes) / modes;
    points.push_back({radius * std::cos(ang) + stddev * rng.normal(),
                      radius * std::sin(ang) + stddev * rng.normal()});
  }
  return points;
}

}  // namespace fedq
