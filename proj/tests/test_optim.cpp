#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cana/optim.hpp"

using cana::num::ParamStore;
using cana::num::Tensor;

TEST_CASE("first Adam step matches the closed form") {
  ParamStore store;
  auto& p = store.add("w", Tensor::row({1.0, -2.0}));
  p.grad[0] = 0.5;
  p.grad[1] = -3.0;
  const double lr = 0.1, eps = 1e-8;
  store.adam_step(lr);
  // Bias-corrected first step: m_hat = g, v_hat = g^2, so the update is
  // lr * g / (|g| + eps) = lr * sign(g) up to eps.
  CHECK(p.value[0] ==
        doctest::Approx(1.0 - lr * 0.5 / (0.5 + eps)).epsilon(1e-12));
  CHECK(p.value[1] ==
        doctest::Approx(-2.0 + lr * 3.0 / (3.0 + eps)).epsilon(1e-12));
  // Gradients are cleared after the step.
  CHECK(p.grad[0] == 0.0);
  CHECK(p.grad[1] == 0.0);
  CHECK(store.step_count() == 1);
}

TEST_CASE("two Adam steps match a scalar reference computation") {
  ParamStore store;
  auto& p = store.add("w", Tensor::row({0.7}));
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double g1 = 1.3, g2 = -0.4;

  double m = 0.0, v = 0.0, x = 0.7;
  double grads[2] = {g1, g2};
  for (int t = 1; t <= 2; ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    x -= lr * mh / (std::sqrt(vh) + eps);
  }

  p.grad[0] = g1;
  store.adam_step(lr, b1, b2, eps);
  p.grad[0] = g2;
  store.adam_step(lr, b1, b2, eps);
  CHECK(p.value[0] == doctest::Approx(x).epsilon(1e-14));
}

TEST_CASE("adam_step rejects non-finite gradients") {
  ParamStore store;
  auto& p = store.add("w", Tensor::row({1.0}));
  p.grad[0] = std::nan("");
  CHECK_THROWS_AS(store.adam_step(0.1), std::runtime_error);
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  ParamStore store;
  auto& p = store.add("w", Tensor::row({3.0}));
  store.adam_step(0.1);
  CHECK(p.value[0] == 3.0);
}
