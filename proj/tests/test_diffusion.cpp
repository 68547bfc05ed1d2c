#include <cmath>
#include <vector>

#include <doctest.h>

#include "fedq/diffusion.hpp"
#include "fedq/errors.hpp"
#include "fedq/rng.hpp"

using namespace fedq;
using doctest::Approx;

namespace {

const NoiseModelArch kTinyArch{4, 6, 5};

// Schedule with a single fully deterministic step: abar = 1 keeps
// x_t = x0 exactly, which pins losses and gradients in closed form.
Schedule identity_schedule() {
  Schedule s;
  s.betas = {0.0};
  s.alphas = {1.0};
  s.alpha_bars = {1.0};
  return s;
}

Schedule single_step(double beta) {
  Schedule s;
  s.betas = {beta};
  s.alphas = {1.0 - beta};
  s.alpha_bars = {1.0 - beta};
  return s;
}

}  // namespace

TEST_SUITE("diffusion") {

TEST_CASE("linear_schedule lays out betas and their products") {
  const Schedule flat = linear_schedule(2, 0.5, 0.5);
  REQUIRE(flat.steps() == 2);
  CHECK(flat.betas[0] == 0.5);
  CHECK(flat.betas[1] == 0.5);
  CHECK(flat.alphas[0] == 0.5);
  CHECK(flat.alpha_bars[0] == Approx(0.5).epsilon(1e-15));
  CHECK(flat.alpha_bars[1] == Approx(0.25).epsilon(1e-15));

  const Schedule ramp = linear_schedule(3, 0.1, 0.3);
  CHECK(ramp.betas[0] == Approx(0.1).epsilon(1e-15));
  CHECK(ramp.betas[1] == Approx(0.2).epsilon(1e-15));
  CHECK(ramp.betas[2] == Approx(0.3).epsilon(1e-15));
  CHECK(ramp.alpha_bars[0] == Approx(0.9).epsilon(1e-15));
  CHECK(ramp.alpha_bars[1] == Approx(0.72).epsilon(1e-15));
  CHECK(ramp.alpha_bars[2] == Approx(0.504).epsilon(1e-15));

  const Schedule one = linear_schedule(1, 0.2, 0.9);
  REQUIRE(one.steps() == 1);
  CHECK(one.betas[0] == 0.2);

  const Schedule main = linear_schedule(50, 0.02, 0.4);
  REQUIRE(main.steps() == 50);
  CHECK(main.betas.front() == Approx(0.02).epsilon(1e-15));
  CHECK(main.betas.back() == Approx(0.4).epsilon(1e-15));
  for (int t = 1; t < 50; ++t) {
    CHECK(main.betas[t] > main.betas[t - 1]);
    CHECK(main.alpha_bars[t] < main.alpha_bars[t - 1]);
  }
  CHECK(main.alpha_bars.back() > 0.0);
  CHECK(main.alpha_bars.back() < 0.01);

  CHECK_THROWS_AS(linear_schedule(0, 0.1, 0.2), InvalidSchedule);
  CHECK_THROWS_AS(linear_schedule(5, 0.0, 0.2), InvalidSchedule);
  CHECK_THROWS_AS(linear_schedule(5, 0.1, 1.0), InvalidSchedule);
  CHECK_THROWS_AS(linear_schedule(5, 0.3, 0.2), InvalidSchedule);
}

TEST_CASE("noise model shape and initialization") {
  const NoiseModelArch main{16, 64, 64};
  CHECK(main.input_dim() == 18);
  CHECK(main.param_count() == 5506);
  CHECK(kTinyArch.param_count() == 89);

  const NoiseModel a(main, 7);
  const NoiseModel b(main, 7);
  const NoiseModel c(main, 8);
  REQUIRE(a.weights().size() == 5506);
  CHECK(a.weights() == b.weights());
  CHECK(a.weights() != c.weights());

  // Biases start at zero, weights inside the Glorot bounds.
  const int w1 = main.input_dim() * main.hidden1;
  const double bound1 = std::sqrt(6.0 / (main.input_dim() + main.hidden1));
  bool any_nonzero = false;
  for (int i = 0; i < w1; ++i) {
    CHECK(std::fabs(a.weights()[i]) <= bound1);
    any_nonzero = any_nonzero || a.weights()[i] != 0.0;
  }
  CHECK(any_nonzero);
  for (int i = w1; i < w1 + main.hidden1; ++i) CHECK(a.weights()[i] == 0.0);

  CHECK_THROWS_AS(NoiseModel(main, WeightVector(5505, 0.0)), ShapeError);
  NoiseModel resized(main, 1);
  CHECK_THROWS_AS(resized.set_weights(WeightVector(2, 0.0)), ShapeError);
}

TEST_CASE("predict routes a hand-wired network") {
  // Only the first input coordinate reaches the output: one active
  // unit per layer, so out = (tanh(tanh(x1)) + 0.25, -1).
  const NoiseModelArch arch = kTinyArch;
  WeightVector w(static_cast<size_t>(arch.param_count()), 0.0);
  const int in = arch.input_dim();
  w[0 * arch.hidden1 + 0] = 1.0;                       // W1[x1][unit0]
  const int w2_off = in * arch.hidden1 + arch.hidden1;
  w[w2_off + 0 * arch.hidden2 + 0] = 1.0;              // W2[unit0][unit0]
  const int w3_off = w2_off + arch.hidden1 * arch.hidden2 + arch.hidden2;
  w[w3_off + 0 * 2 + 0] = 1.0;                         // W3[unit0][out0]
  const int b3_off = w3_off + arch.hidden2 * 2;
  w[b3_off + 0] = 0.25;
  w[b3_off + 1] = -1.0;

  const NoiseModel model(arch, w);
  for (int t : {1, 3}) {
    const Point2 out = model.predict({0.7, -0.3}, t);
    CHECK(out[0] == Approx(std::tanh(std::tanh(0.7)) + 0.25).epsilon(1e-15));
    CHECK(out[1] == Approx(-1.0).epsilon(1e-15));
  }

  // A generic network does depend on the timestep.
  const NoiseModel generic(arch, 99);
  const Point2 p1 = generic.predict({0.7, -0.3}, 1);
  const Point2 p2 = generic.predict({0.7, -0.3}, 4);
  CHECK((p1[0] != p2[0] || p1[1] != p2[1]));
}

TEST_CASE("diffuse_forward closes the chain in one jump") {
  const Schedule s = single_step(0.75);
  const Point2 x = diffuse_forward({2.0, -4.0}, 1, {1.0, 0.5}, s);
  CHECK(x[0] == Approx(0.5 * 2.0 + std::sqrt(0.75) * 1.0).epsilon(1e-15));
  CHECK(x[1] == Approx(0.5 * -4.0 + std::sqrt(0.75) * 0.5).epsilon(1e-15));

  const Point2 same = diffuse_forward({2.0, -4.0}, 1, {1.0, 0.5}, identity_schedule());
  CHECK(same[0] == 2.0);
  CHECK(same[1] == -4.0);

  CHECK_THROWS_AS(diffuse_forward({0.0, 0.0}, 0, {0.0, 0.0}, s), ShapeError);
  CHECK_THROWS_AS(diffuse_forward({0.0, 0.0}, 2, {0.0, 0.0}, s), ShapeError);
}

TEST_CASE("make_batch draws from the dataset") {
  const std::vector<Point2> data = {{0.0, 1.0}, {2.0, 3.0}, {4.0, 5.0}};
  Rng rng(11);
  const Batch batch = make_batch(data, 40, 5, rng);
  REQUIRE(batch.size() == 40);
  REQUIRE(batch.t.size() == 40);
  REQUIRE(batch.eps.size() == 40);
  for (size_t i = 0; i < batch.size(); ++i) {
    CHECK(batch.t[i] >= 1);
    CHECK(batch.t[i] <= 5);
    bool member = false;
    for (const Point2& p : data) member = member || p == batch.x0[i];
    CHECK(member);
    CHECK(std::isfinite(batch.eps[i][0]));
    CHECK(std::isfinite(batch.eps[i][1]));
  }

  Rng again(11);
  const Batch repeat = make_batch(data, 40, 5, again);
  CHECK(repeat.x0 == batch.x0);
  CHECK(repeat.t == batch.t);
  CHECK(repeat.eps == batch.eps);

  Rng empty_rng(11);
  CHECK_THROWS_AS(make_batch({}, 4, 5, empty_rng), TooFewSamples);
}

TEST_CASE("loss vanishes exactly when the predictor is right") {
  const NoiseModel model(kTinyArch, 21);
  const Schedule s = identity_schedule();
  Batch batch;
  for (double v : {-1.5, 0.25, 2.0}) {
    const Point2 x0{v, -v};
    batch.x0.push_back(x0);
    batch.t.push_back(1);
    batch.eps.push_back(model.predict(x0, 1));
  }
  CHECK(batch_loss(model, batch, s) == 0.0);

  const LossGrad lg = loss_and_grad(model, batch, s);
  CHECK(lg.loss == 0.0);
  for (double g : lg.grad) CHECK(g == 0.0);
}

TEST_CASE("batch_loss agrees with a by-hand evaluation") {
  const NoiseModel model(kTinyArch, 33);
  const Schedule s = linear_schedule(4, 0.1, 0.3);
  Rng rng(34);
  const std::vector<Point2> data = {{1.0, 0.0}, {-2.0, 0.5}, {0.1, 0.1}};
  const Batch batch = make_batch(data, 16, s.steps(), rng);

  double expected = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const Point2 xt = diffuse_forward(batch.x0[i], batch.t[i], batch.eps[i], s);
    const Point2 out = model.predict(xt, batch.t[i]);
    const double dx = out[0] - batch.eps[i][0];
    const double dy = out[1] - batch.eps[i][1];
    expected += dx * dx + dy * dy;
  }
  expected /= static_cast<double>(batch.size());

  CHECK(batch_loss(model, batch, s) == Approx(expected).epsilon(1e-14));
  CHECK(loss_and_grad(model, batch, s).loss == Approx(expected).epsilon(1e-14));
}

TEST_CASE("backprop matches central finite differences") {
  const Schedule s = linear_schedule(4, 0.1, 0.3);
  const std::vector<Point2> data = {{1.0, -1.0}, {0.4, 2.0}, {-0.6, -0.2}};
  for (uint64_t seed : {101, 202, 303}) {
    const NoiseModel model(kTinyArch, seed);
    Rng rng(seed + 1);
    const Batch batch = make_batch(data, 5, s.steps(), rng);
    const LossGrad lg = loss_and_grad(model, batch, s);
    REQUIRE(lg.grad.size() == model.weights().size());

    const double h = 1e-6;
    for (size_t j = 0; j < lg.grad.size(); ++j) {
      WeightVector up = model.weights();
      WeightVector dn = model.weights();
      up[j] += h;
      dn[j] -= h;
      const double fd = (batch_loss(NoiseModel(kTinyArch, up), batch, s) -
                         batch_loss(NoiseModel(kTinyArch, dn), batch, s)) /
                        (2.0 * h);
      CHECK(std::fabs(fd - lg.grad[j]) <= 1e-6 * std::max(1.0, std::fabs(lg.grad[j])));
    }
  }
}

TEST_CASE("loss_and_grad flags numeric blowups") {
  NoiseModel model(kTinyArch, 5);
  model.set_weights(WeightVector(static_cast<size_t>(kTinyArch.param_count()), 1e200));
  Batch batch;
  batch.x0.push_back({1.0, 1.0});
  batch.t.push_back(1);
  batch.eps.push_back({0.0, 0.0});
  CHECK_THROWS_AS(loss_and_grad(model, batch, single_step(0.5)), NumericalOverflow);
}

TEST_CASE("sgd_step applies the update and descends") {
  NoiseModel model(kTinyArch, 55);
  const WeightVector before = model.weights();
  WeightVector grad(before.size(), 0.0);
  grad[3] = 2.0;
  grad[10] = -1.0;
  sgd_step(model, grad, 0.5);
  CHECK(model.weights()[3] == before[3] - 1.0);
  CHECK(model.weights()[10] == before[10] + 0.5);
  CHECK(model.weights()[0] == before[0]);

  CHECK_THROWS_AS(sgd_step(model, WeightVector(3, 0.0), 0.1), ShapeError);

  const Schedule s = linear_schedule(6, 0.05, 0.3);
  Rng rng(56);
  const auto data = make_mixture_dataset(64, 4, 2.0, 0.2, rng);
  NoiseModel learner(kTinyArch, 57);
  Rng brng(58);
  const Batch batch = make_batch(data, 32, s.steps(), brng);
  const LossGrad lg = loss_and_grad(learner, batch, s);
  REQUIRE(lg.loss > 1e-12);
  sgd_step(learner, lg.grad, 1e-3);
  CHECK(batch_loss(learner, batch, s) < lg.loss);
}

TEST_CASE("denoise_path closed forms") {
  // Zero predictor: every step just divides by sqrt(alpha), so the
  // path ends at x / sqrt(abar).
  const Schedule s = linear_schedule(5, 0.1, 0.3);
  const Predictor zero = [](const Point2&, int) { return Point2{0.0, 0.0}; };
  const Point2 start{1.5, -2.0};
  const Point2 end = denoise_path(zero, s, start, nullptr);
  const double scale = 1.0 / std::sqrt(s.alpha_bars.back());
  CHECK(end[0] == Approx(1.5 * scale).epsilon(1e-12));
  CHECK(end[1] == Approx(-2.0 * scale).epsilon(1e-12));

  // One step with a constant predictor, by hand.
  const Schedule one = single_step(0.75);
  const Predictor ones = [](const Point2&, int) { return Point2{1.0, 1.0}; };
  const Point2 x0 = denoise_path(ones, one, {1.0, 1.0}, nullptr);
  const double expect = (1.0 - 0.75 / std::sqrt(0.75)) / std::sqrt(0.25);
  CHECK(x0[0] == Approx(expect).epsilon(1e-12));
  CHECK(x0[1] == Approx(expect).epsilon(1e-12));

  // A predictor that returns the true injected noise inverts the
  // single-step chain exactly.
  const Point2 clean{0.3, -0.8};
  const Point2 eps{0.9, 0.4};
  const Point2 noised = diffuse_forward(clean, 1, eps, one);
  const Predictor truth = [&](const Point2&, int) { return eps; };
  const Point2 rec = denoise_path(truth, one, noised, nullptr);
  CHECK(rec[0] == Approx(clean[0]).epsilon(1e-12));
  CHECK(rec[1] == Approx(clean[1]).epsilon(1e-12));
}

TEST_CASE("denoise_path injects noise only before the final step") {
  const Predictor zero = [](const Point2&, int) { return Point2{0.0, 0.0}; };

  const Schedule one = single_step(0.5);
  Rng rng(77);
  const Point2 with_rng = denoise_path(zero, one, {1.0, 1.0}, &rng);
  const Point2 without = denoise_path(zero, one, {1.0, 1.0}, nullptr);
  CHECK(with_rng[0] == without[0]);
  CHECK(with_rng[1] == without[1]);

  const Schedule s = linear_schedule(5, 0.1, 0.3);
  Rng rng2(78);
  const Point2 noisy = denoise_path(zero, s, {1.0, 1.0}, &rng2);
  const Point2 skeleton = denoise_path(zero, s, {1.0, 1.0}, nullptr);
  CHECK((noisy[0] != skeleton[0] || noisy[1] != skeleton[1]));
}

TEST_CASE("sample is reproducible point by point") {
  const NoiseModel model(kTinyArch, 91);
  const Schedule s = linear_schedule(8, 0.05, 0.3);
  const auto ten = sample(model, s, 10, 1234);
  const auto three = sample(model, s, 3, 1234);
  const auto other = sample(model, s, 3, 1235);
  REQUIRE(ten.size() == 10);
  REQUIRE(three.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(ten[i] == three[i]);
  }
  CHECK(three != other);
  for (const Point2& p : ten) {
    CHECK(std::isfinite(p[0]));
    CHECK(std::isfinite(p[1]));
  }
  CHECK(sample(model, s, 0, 1).empty());
}

TEST_CASE("make_mixture_dataset spreads points over the ring") {
  Rng exact(5);
  const auto centers = make_mixture_dataset(16, 8, 4.0, 0.0, exact);
  REQUIRE(centers.size() == 16);
  const double pi = std::acos(-1.0);
  for (int i = 0; i < 16; ++i) {
    const double angle = 2.0 * pi * static_cast<double>(i % 8) / 8.0;
    CHECK(centers[i][0] == Approx(4.0 * std::cos(angle)).epsilon(1e-12).scale(1.0));
    CHECK(centers[i][1] == Approx(4.0 * std::sin(angle)).epsilon(1e-12).scale(1.0));
  }

  Rng a(6);
  Rng b(6);
  const auto da = make_mixture_dataset(100, 8, 4.0, 0.3, a);
  const auto db = make_mixture_dataset(100, 8, 4.0, 0.3, b);
  CHECK(da == db);
  for (int i = 0; i < 100; ++i) {
    const double angle = 2.0 * pi * static_cast<double>(i % 8) / 8.0;
    const double dx = da[i][0] - 4.0 * std::cos(angle);
    const double dy = da[i][1] - 4.0 * std::sin(angle);
    CHECK(std::sqrt(dx * dx + dy * dy) <= 6.0 * 0.3);
  }
}

TEST_CASE("a few hundred SGD steps cut the denoising loss") {
  const NoiseModelArch arch{16, 64, 64};
  const Schedule sched = linear_schedule(50, 0.02, 0.4);
  Rng data_rng(derive_seed(31337, 1));
  const auto data = make_mixture_dataset(256, 8, 4.0, 0.3, data_rng);

  NoiseModel model(arch, derive_seed(31337, 2));
  Rng eval_rng(derive_seed(31337, 4));
  const Batch eval = make_batch(data, 512, sched.steps(), eval_rng);
  const double before = batch_loss(model, eval, sched);

  Rng batch_rng(derive_seed(31337, 3));
  for (int step = 0; step < 400; ++step) {
    const Batch batch = make_batch(data, 64, sched.steps(), batch_rng);
    const LossGrad lg = loss_and_grad(model, batch, sched);
    sgd_step(model, lg.grad, 0.01);
  }
  const double after = batch_loss(model, eval, sched);
  CHECK(std::isfinite(after));
  CHECK(after < 0.5 * before);
}

}  // TEST_SUITE
