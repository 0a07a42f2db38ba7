// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/optim.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"

using namespace bsrnn;

namespace {

// Minimal two-parameter store with hand-set gradients.
ParamStore make_store(double a0, double a1, double b0) {
  ParamStore store;
  Tensor a({2});
  a[0] = a0;
  a[1] = a1;
  store.add("a", a);
  store.add("b", Tensor::scalar(b0));
  return store;
}

void set_grads(ParamStore& store, double ga0, double ga1, double gb0) {
  store.zero_grads();
  store.at("a")->grad[0] = ga0;
  store.at("a")->grad[1] = ga1;
  store.at("b")->grad[0] = gb0;
}

}  // namespace

TEST_CASE("learning rate decays by 0.98 every two epochs") {
  const double base = 1e-3;
  CHECK(lr_at_epoch(base, 0) == base);
  CHECK(lr_at_epoch(base, 1) == base);
  CHECK(lr_at_epoch(base, 2) == base * 0.98);
  CHECK(lr_at_epoch(base, 3) == base * 0.98);
  CHECK(lr_at_epoch(base, 7) == base * std::pow(0.98, 3.0));
  CHECK(lr_at_epoch(base, 200) == base * std::pow(0.98, 100.0));
  CHECK(lr_at_epoch(base, 5, 0.5, 1) == base * std::pow(0.5, 5.0));
  CHECK_THROWS(lr_at_epoch(base, -1));
  CHECK_THROWS(lr_at_epoch(base, 3, 0.98, 0));
}

TEST_CASE("batch-size lr adjustment is linear") {
  CHECK(adjusted_lr(1e-3, 4, 16) == 2.5e-4);
  CHECK(adjusted_lr(1e-3, 16, 16) == 1e-3);
  CHECK(adjusted_lr(1e-3, 32, 16) == 2e-3);
  CHECK_THROWS(adjusted_lr(1e-3, 0, 16));
  CHECK_THROWS(adjusted_lr(1e-3, -4, 16));
  CHECK_THROWS(adjusted_lr(1e-3, 4, 0));
}

TEST_CASE("global gradient norm pools every parameter") {
  ParamStore store = make_store(0.0, 0.0, 0.0);
  set_grads(store, 3.0, 0.0, 4.0);
  CHECK(global_grad_norm(store) == 5.0);
}

TEST_CASE("clipping rescales to the ball and preserves direction") {
  ParamStore store = make_store(0.0, 0.0, 0.0);
  set_grads(store, 6.0, 0.0, 8.0);  // norm 10

  const double scale = clip_gradients(store, 5.0);
  CHECK(scale == 0.5);
  CHECK(store.at("a")->grad[0] == 3.0);
  CHECK(store.at("b")->grad[0] == 4.0);
  CHECK(global_grad_norm(store) == doctest::Approx(5.0));
  // Direction: the component ratio is unchanged.
  CHECK(store.at("a")->grad[0] / store.at("b")->grad[0] == doctest::Approx(6.0 / 8.0));

  set_grads(store, 1.0, 1.0, 1.0);
  CHECK(clip_gradients(store, 5.0) == 1.0);
  CHECK(store.at("a")->grad[0] == 1.0);

  set_grads(store, 0.0, 0.0, 0.0);
  CHECK(clip_gradients(store, 5.0) == 1.0);
  CHECK_THROWS(clip_gradients(store, 0.0));
}

TEST_CASE("gradient scaling divides exactly") {
  ParamStore store = make_store(0.0, 0.0, 0.0);
  set_grads(store, 2.0, -6.0, 10.0);
  scale_gradients(store, 4.0);
  CHECK(store.at("a")->grad[0] == 0.5);
  CHECK(store.at("a")->grad[1] == -1.5);
  CHECK(store.at("b")->grad[0] == 2.5);
  CHECK_THROWS(scale_gradients(store, 0.0));
}

TEST_CASE("adam reproduces a scalar reference implementation") {
  ParamStore store = make_store(1.0, -2.0, 0.5);
  AdamOptimizer opt;
  CHECK(opt.steps_taken() == 0);

  // Mirror of the update rule, evaluated with the same operation order.
  struct Ref {
    double m = 0.0, v = 0.0, x;
    explicit Ref(double x0) : x(x0) {}
    void step(double g, double lr, int64_t t) {
      m = 0.9 * m + (1.0 - 0.9) * g;
      v = 0.999 * v + (1.0 - 0.999) * g * g;
      const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t));
      x -= lr * (m / bc1) / (std::sqrt(v / bc2) + 1e-8);
    }
  };
  Ref ra0(1.0), ra1(-2.0), rb0(0.5);

  const std::vector<std::array<double, 3>> grads = {
      {2.0, -1.0, 0.25}, {0.5, 0.5, -4.0}, {-3.0, 2.0, 1.0}, {0.0, 1e-4, 7.0}, {1.0, 1.0, 1.0}};
  double lr = 0.1;
  for (size_t s = 0; s < grads.size(); ++s) {
    set_grads(store, grads[s][0], grads[s][1], grads[s][2]);
    opt.step(store, lr);
    ra0.step(grads[s][0], lr, static_cast<int64_t>(s + 1));
    ra1.step(grads[s][1], lr, static_cast<int64_t>(s + 1));
    rb0.step(grads[s][2], lr, static_cast<int64_t>(s + 1));
    lr *= 0.9;
  }
  CHECK(opt.steps_taken() == 5);
  CHECK(store.at("a")->value[0] == ra0.x);
  CHECK(store.at("a")->value[1] == ra1.x);
  CHECK(store.at("b")->value[0] == rb0.x);
}

TEST_CASE("first adam step with a unit-scale gradient moves by about lr") {
  ParamStore store = make_store(1.0, 0.0, 0.0);
  set_grads(store, 2.0, 0.0, 0.0);
  AdamOptimizer opt;
  opt.step(store, 0.1);
  // Bias correction makes mhat = g and vhat = g^2 on step one.
  CHECK(store.at("a")->value[0] == doctest::Approx(1.0 - 0.1 * (2.0 / (2.0 + 1e-8))));
  // A zero-gradient coordinate must not move (0/(0+eps) = 0).
  CHECK(store.at("a")->value[1] == 0.0);
}

TEST_CASE("adam state restore continues the exact trajectory") {
  ParamStore s1 = make_store(1.0, -1.0, 2.0);
  ParamStore s2 = make_store(1.0, -1.0, 2.0);
  const std::vector<std::array<double, 3>> grads = {
      {1.0, 2.0, 3.0}, {-1.0, 0.5, 0.0}, {2.0, 2.0, -2.0}, {0.1, 0.2, 0.3}, {5.0, -5.0, 5.0}};

  AdamOptimizer straight;
  for (const auto& g : grads) {
    set_grads(s1, g[0], g[1], g[2]);
    straight.step(s1, 0.05);
  }

  AdamOptimizer part1;
  for (size_t s = 0; s < 3; ++s) {
    set_grads(s2, grads[s][0], grads[s][1], grads[s][2]);
    part1.step(s2, 0.05);
  }
  AdamOptimizer part2;
  part2.restore(part1.state(), part1.steps_taken());
  for (size_t s = 3; s < grads.size(); ++s) {
    set_grads(s2, grads[s][0], grads[s][1], grads[s][2]);
    part2.step(s2, 0.05);
  }

  CHECK(s1.at("a")->value[0] == s2.at("a")->value[0]);
  CHECK(s1.at("a")->value[1] == s2.at("a")->value[1]);
  CHECK(s1.at("b")->value[0] == s2.at("b")->value[0]);
  CHECK(part2.steps_taken() == 5);
}

TEST_CASE("adam rejects bad hyperparameters") {
  CHECK_THROWS(AdamOptimizer(1.0, 0.999, 1e-8));
  CHECK_THROWS(AdamOptimizer(0.9, -0.1, 1e-8));
  CHECK_THROWS(AdamOptimizer(0.9, 0.999, 0.0));
  AdamOptimizer ok;
  CHECK_THROWS(ok.restore({}, -1));
}

TEST_CASE("early stopping waits out the configured patience") {
  EarlyStop stop(10, /*maximize=*/true);
  CHECK(!stop.update(7.0, 0));
  CHECK(!stop.update(7.5, 1));
  for (int e = 2; e <= 10; ++e) {
    CAPTURE(e);
    CHECK(!stop.update(7.4, e));
  }
  CHECK(stop.update(7.4, 11));  // tenth non-improving epoch
  CHECK(stop.best_value() == 7.5);
  CHECK(stop.best_epoch() == 1);
  CHECK(stop.epochs_since_best() == 10);
}

TEST_CASE("early stopping in minimize mode treats ties as no improvement") {
  EarlyStop stop(2, /*maximize=*/false);
  CHECK(!stop.update(5.0, 0));
  CHECK(!stop.update(4.0, 1));
  CHECK(!stop.update(4.0, 2));  // tie: not an improvement
  CHECK(stop.update(4.5, 3));
  CHECK(stop.best_value() == 4.0);
  CHECK(stop.best_epoch() == 1);
}

TEST_CASE("early stopping state restores for resume") {
  EarlyStop stop(10, true);
  stop.restore(7.5, 1, 9);
  CHECK(stop.best_value() == 7.5);
  CHECK(stop.epochs_since_best() == 9);
  CHECK(stop.update(7.0, 11));  // one more miss exhausts patience
}

TEST_CASE("early stopping guards its inputs") {
  CHECK_THROWS(EarlyStop(0, true));
  EarlyStop fresh(3, true);
  CHECK_THROWS(fresh.best_value());
  CHECK_THROWS(fresh.best_epoch());
}
