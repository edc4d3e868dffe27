#include "cana/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace cana::num {

Param& ParamStore::add(const std::string& name, Tensor init) {
  auto [it, inserted] = params_.emplace(name, Param{});
  if (!inserted) throw std::invalid_argument("ParamStore: duplicate " + name);
  Param& p = it->second;
  p.grad = Tensor(init.shape);
  p.m = Tensor(init.shape);
  p.v = Tensor(init.shape);
  p.value = std::move(init);
  return p;
}

Param& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end())
    throw std::invalid_argument("ParamStore: unknown " + name);
  return it->second;
}

const Param& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end())
    throw std::invalid_argument("ParamStore: unknown " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, p] : params_) p.grad.fill(0.0);
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  for (auto& [name, p] : params_) {
    if (!p.grad.all_finite())
      throw std::runtime_error("adam_step: non-finite gradient in " + name);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      p.m[i] = beta1 * p.m[i] + (1.0 - beta1) * g;
      p.v[i] = beta2 * p.v[i] + (1.0 - beta2) * g * g;
      const double mhat = p.m[i] / bc1;
      const double vhat = p.v[i] / bc2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    p.grad.fill(0.0);
  }
}

}  // namespace cana::num
