#include "cana/tensor.hpp"

#include <cmath>

namespace cana::num {

bool Tensor::all_finite() const {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace cana::num
