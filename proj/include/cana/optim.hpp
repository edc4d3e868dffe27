#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cana/autodiff.hpp"
#include "cana/tensor.hpp"

namespace cana::num {

struct Param {
  Tensor value;
  Tensor grad;
  Tensor m;  // first moment
  Tensor v;  // second moment
};

/// Named parameters with gradient buffers and Adam state. Ordered map so
/// iteration (and therefore serialization and updates) is deterministic.
class ParamStore {
 public:
  Param& add(const std::string& name, Tensor init);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }

  void zero_grad();

  /// Standard Adam with bias correction; zeroes gradients afterwards.
  /// Throws on non-finite gradients.
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);

  std::int64_t step_count() const { return step_; }

  std::map<std::string, Param>& params() { return params_; }
  const std::map<std::string, Param>& params() const { return params_; }

 private:
  std::map<std::string, Param> params_;
  std::int64_t step_ = 0;
};

/// Records (tape var, param) pairs for one forward pass so gradients can be
/// pulled off the tape after backward().
class Bindings {
 public:
  Var bind(Tape& tape, Param& p) {
    Var v = tape.input(p.value);
    items_.emplace_back(v, &p);
    return v;
  }

  /// Adds each bound var's tape gradient into its param's grad buffer.
  void accumulate(const Tape& tape) {
    for (auto& [var, param] : items_) {
      const Tensor& g = tape.grad(var);
      if (g.size() == 0) continue;  // unreached in this pass
      for (std::size_t i = 0; i < g.size(); ++i) param->grad[i] += g[i];
    }
  }

 private:
  std::vector<std::pair<Var, Param*>> items_;
};

}  // namespace cana::num
