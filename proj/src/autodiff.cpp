#include "cana/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cana::num {
namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

CMap as_mat(const Tensor& t) {
  return CMap(t.v.data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}

MMap as_mat(Tensor& t) {
  return MMap(t.v.data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}

bool is_scalar(const Tensor& t) { return t.size() == 1; }

}  // namespace

Var Tape::emplace(Tensor value,
                  std::function<void(Tape&, const Tensor&)> back) {
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(back)});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_buf(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor(n.value.shape);
  return n.grad;
}

Var Tape::input(Tensor t) { return emplace(std::move(t), nullptr); }

void Tape::backward(Var loss) {
  require(loss.valid() && is_scalar(nodes_[loss.id].value),
          "backward: loss must be a scalar");
  grad_buf(loss.id)[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.back) continue;
    n.back(*this, n.grad);
  }
}

Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "add: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += tb[i];
  return emplace(std::move(out), [a, b](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buf(a.id);
    Tensor& gb = t.grad_buf(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "sub: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= tb[i];
  return emplace(std::move(out), [a, b](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buf(a.id);
    Tensor& gb = t.grad_buf(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "mul: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
  return emplace(std::move(out), [a, b](Tape& t, const Tensor& g) {
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    Tensor& ga = t.grad_buf(a.id);
    Tensor& gb = t.grad_buf(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * vb[i];
      gb[i] += g[i] * va[i];
    }
  });
}

Var Tape::scale(Var a, double c) {
  Tensor out = value(a);
  for (double& x : out.v) x *= c;
  return emplace(std::move(out), [a, c](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buf(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
}

Var Tape::add_scalar(Var a, double c) {
  Tensor out = value(a);
  for (double& x : out.v) x += c;
  return emplace(std::move(out), [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buf(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var Tape::relu(Var a) {
  Tensor out = value(a);
  for (double& x : out.v) x = x > 0.0 ? x : 0.0;
  return emplace(std::move(out), [a](Tape& t, const Tensor& g) {
    const Tensor& va = t.value(a);
    Tensor& ga = t.grad_buf(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (va[i] > 0.0) ga[i] += g[i];
    }
  });
}

Var Tape::sigmoid(Var a) {
  Tensor out = value(a);
  for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
  Var r = emplace(std::move(out), nullptr);
  nodes_[r.id].back = [a, r](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(r);
    Tensor& ga = t.grad_buf(a.id);
    for (std::size_t i = 0; i < g.size(); ++i)
      ga[i] += g[i] * y[i] * (1.0 - y[i]);
  };
  return r;
}

Var Tape::softplus(Var a) {
  Tensor out = value(a);
  for (double& x : out.v)
    x = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return emplace(std::move(out), [a](Tape& t, const Tensor& g) {
    const Tensor& va = t.value(a);
    Tensor& ga = t.grad_buf(a.id);
    for (std::size_t i = 0; i < g.size(); ++i)
      ga[i] += g[i] / (1.0 + std::exp(-va[i]));
  });
}

Var Tape::reciprocal(Var a) {
  Tensor out = value(a);
  for (double& x : out.v) x = 1.0 / x;
  Var r = emplace(std::move(out), nullptr);
  nodes_[r.id].back = [a, r](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(r);
    Tensor& ga = t.grad_buf(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i] * y[i] * y[i];
  };
  return r;
}

Var Tape::log(Var a) {
  Tensor out = value(a);
  for (double& x : out.v) x = std::log(x);
  return emplace(std::move(out), [a](Tape& t, const Tensor& g) {
    const Tensor& va = t.value(a);
    Tensor& ga = t.grad_buf(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / va[i];
  });
}

Var Tape::sqrt_safe(Var a) {
  constexpr double kEps = 1e-12;
  Tensor out = value(a);
  for (double& x : out.v) x = std::sqrt(std::max(x, 0.0));
  return emplace(std::move(out), [a](Tape& t, const Tensor& g) {
    const Tensor& va = t.value(a);
    Tensor& ga = t.grad_buf(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (va[i] > kEps) ga[i] += g[i] * 0.5 / std::sqrt(va[i]);
    }
  });
}

Var Tape::clamp(Var a, double lo, double hi) {
  Tensor out = value(a);
  for (double& x : out.v) x = std::min(std::max(x, lo), hi);
  return emplace(std::move(out), [a, lo, hi](Tape& t, const Tensor& g) {
    const Tensor& va = t.value(a);
    Tensor& ga = t.grad_buf(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (va[i] > lo && va[i] < hi) ga[i] += g[i];
    }
  });
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.shape.size() == 2 && tb.shape.size() == 2 &&
              ta.cols() == tb.rows(),
          "matmul: shape mismatch");
  Tensor out(ta.rows(), tb.cols());
  as_mat(out) = as_mat(ta) * as_mat(tb);
  return emplace(std::move(out), [a, b](Tape& t, const Tensor& g) {
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    as_mat(t.grad_buf(a.id)) += as_mat(g) * as_mat(vb).transpose();
    as_mat(t.grad_buf(b.id)) += as_mat(va).transpose() * as_mat(g);
  });
}

Var Tape::add_rowvec(Var a, Var bias) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(bias);
  require(tb.rows() == 1 && tb.cols() == ta.cols(),
          "add_rowvec: bias shape mismatch");
  Tensor out = ta;
  const std::size_t c = ta.cols();
  for (std::size_t r = 0; r < ta.rows(); ++r)
    for (std::size_t j = 0; j < c; ++j) out.at(r, j) += tb[j];
  return emplace(std::move(out), [a, bias](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buf(a.id);
    Tensor& gb = t.grad_buf(bias.id);
    const std::size_t c = g.cols();
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t j = 0; j < c; ++j) {
        ga.at(r, j) += g.at(r, j);
        gb[j] += g.at(r, j);
      }
  });
}

Var Tape::scale_by_scalar(Var a, Var s) {
  require(is_scalar(value(s)), "scale_by_scalar: s must be scalar");
  const double sv = value(s)[0];
  Tensor out = value(a);
  for (double& x : out.v) x *= sv;
  return emplace(std::move(out), [a, s](Tape& t, const Tensor& g) {
    const Tensor& va = t.value(a);
    const double sv = t.value(s)[0];
    Tensor& ga = t.grad_buf(a.id);
    Tensor& gs = t.grad_buf(s.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * sv;
      gs[0] += g[i] * va[i];
    }
  });
}

Var Tape::softmax_rows(Var a) {
  const Tensor& ta = value(a);
  Tensor out = ta;
  const std::size_t c = ta.cols();
  for (std::size_t r = 0; r < ta.rows(); ++r) {
    double mx = out.at(r, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, out.at(r, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out.at(r, j) = std::exp(out.at(r, j) - mx);
      z += out.at(r, j);
    }
    for (std::size_t j = 0; j < c; ++j) out.at(r, j) /= z;
  }
  Var r = emplace(std::move(out), nullptr);
  nodes_[r.id].back = [a, r](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(r);
    Tensor& ga = t.grad_buf(a.id);
    const std::size_t c = y.cols();
    for (std::size_t row = 0; row < y.rows(); ++row) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g.at(row, j) * y.at(row, j);
      for (std::size_t j = 0; j < c; ++j)
        ga.at(row, j) += y.at(row, j) * (g.at(row, j) - dot);
    }
  };
  return r;
}

Var Tape::rowsum(Var a) {
  const Tensor& ta = value(a);
  Tensor out(ta.rows(), 1);
  for (std::size_t r = 0; r < ta.rows(); ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < ta.cols(); ++j) s += ta.at(r, j);
    out[r] = s;
  }
  return emplace(std::move(out), [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buf(a.id);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga.at(r, j) += g[r];
  });
}

Var Tape::colsum(Var a) {
  const Tensor& ta = value(a);
  Tensor out(1, ta.cols());
  for (std::size_t r = 0; r < ta.rows(); ++r)
    for (std::size_t j = 0; j < ta.cols(); ++j) out[j] += ta.at(r, j);
  return emplace(std::move(out), [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buf(a.id);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga.at(r, j) += g[j];
  });
}

Var Tape::sum(Var a) {
  const Tensor& ta = value(a);
  double s = 0.0;
  for (double x : ta.v) s += x;
  return emplace(Tensor::scalar(s), [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buf(a.id);
    for (double& x : ga.v) x += g[0];
  });
}

Var Tape::mean(Var a) {
  const Tensor& ta = value(a);
  require(ta.size() > 0, "mean: empty tensor");
  double s = 0.0;
  for (double x : ta.v) s += x;
  const double inv = 1.0 / static_cast<double>(ta.size());
  return emplace(Tensor::scalar(s * inv), [a, inv](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buf(a.id);
    for (double& x : ga.v) x += g[0] * inv;
  });
}

Var Tape::concat_rows(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.cols() == tb.cols(), "concat_rows: column mismatch");
  Tensor out(ta.rows() + tb.rows(), ta.cols());
  std::copy(ta.v.begin(), ta.v.end(), out.v.begin());
  std::copy(tb.v.begin(), tb.v.end(), out.v.begin() + ta.size());
  return emplace(std::move(out), [a, b](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buf(a.id);
    Tensor& gb = t.grad_buf(b.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[ga.size() + i];
  });
}

Var Tape::concat_cols(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.rows() == tb.rows(), "concat_cols: row mismatch");
  Tensor out(ta.rows(), ta.cols() + tb.cols());
  for (std::size_t r = 0; r < ta.rows(); ++r) {
    for (std::size_t j = 0; j < ta.cols(); ++j) out.at(r, j) = ta.at(r, j);
    for (std::size_t j = 0; j < tb.cols(); ++j)
      out.at(r, ta.cols() + j) = tb.at(r, j);
  }
  return emplace(std::move(out), [a, b](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buf(a.id);
    Tensor& gb = t.grad_buf(b.id);
    const std::size_t ca = ga.cols();
    const std::size_t cb = gb.cols();
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (std::size_t j = 0; j < ca; ++j) ga.at(r, j) += g.at(r, j);
      for (std::size_t j = 0; j < cb; ++j) gb.at(r, j) += g.at(r, ca + j);
    }
  });
}

Var Tape::gather_rows(Var a, std::vector<std::size_t> idx) {
  const Tensor& ta = value(a);
  Tensor out(idx.size(), ta.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] < ta.rows(), "gather_rows: index out of range");
    for (std::size_t j = 0; j < ta.cols(); ++j)
      out.at(i, j) = ta.at(idx[i], j);
  }
  return emplace(std::move(out),
                 [a, idx = std::move(idx)](Tape& t, const Tensor& g) {
                   Tensor& ga = t.grad_buf(a.id);
                   for (std::size_t i = 0; i < idx.size(); ++i)
                     for (std::size_t j = 0; j < g.cols(); ++j)
                       ga.at(idx[i], j) += g.at(i, j);
                 });
}

Var Tape::neighbor_sum(
    Var h, std::vector<std::pair<std::uint32_t, std::uint32_t>> edges) {
  const Tensor& th = value(h);
  Tensor out(th.rows(), th.cols());
  for (const auto& [u, w] : edges) {
    require(u < th.rows() && w < th.rows(), "neighbor_sum: bad edge");
    for (std::size_t j = 0; j < th.cols(); ++j) {
      out.at(w, j) += th.at(u, j);
      out.at(u, j) += th.at(w, j);
    }
  }
  return emplace(std::move(out),
                 [h, edges = std::move(edges)](Tape& t, const Tensor& g) {
                   Tensor& gh = t.grad_buf(h.id);
                   for (const auto& [u, w] : edges)
                     for (std::size_t j = 0; j < g.cols(); ++j) {
                       gh.at(u, j) += g.at(w, j);
                       gh.at(w, j) += g.at(u, j);
                     }
                 });
}

Var Tape::cross_entropy(Var logits, const std::vector<int>& labels,
                        std::vector<std::size_t> rows) {
  require(!rows.empty(), "cross_entropy: empty row set");
  const Tensor& tl = value(logits);
  const std::size_t k = tl.cols();
  double total = 0.0;
  for (std::size_t r : rows) {
    require(r < tl.rows(), "cross_entropy: row out of range");
    const int y = labels[r];
    require(y >= 0 && static_cast<std::size_t>(y) < k,
            "cross_entropy: label out of range");
    double mx = tl.at(r, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, tl.at(r, j));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(tl.at(r, j) - mx);
    total += std::log(z) + mx - tl.at(r, static_cast<std::size_t>(y));
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  return emplace(
      Tensor::scalar(total * inv),
      [logits, labels, rows = std::move(rows), inv](Tape& t,
                                                    const Tensor& g) {
        const Tensor& tl = t.value(logits);
        Tensor& gl = t.grad_buf(logits.id);
        const std::size_t k = tl.cols();
        for (std::size_t r : rows) {
          double mx = tl.at(r, 0);
          for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, tl.at(r, j));
          double z = 0.0;
          for (std::size_t j = 0; j < k; ++j) z += std::exp(tl.at(r, j) - mx);
          for (std::size_t j = 0; j < k; ++j) {
            double p = std::exp(tl.at(r, j) - mx) / z;
            if (j == static_cast<std::size_t>(labels[r])) p -= 1.0;
            gl.at(r, j) += g[0] * inv * p;
          }
        }
      });
}

Var Tape::cw_margin_mean(Var probs, std::vector<std::size_t> targets,
                         const std::vector<int>& labels) {
  require(!targets.empty(), "cw_margin_mean: empty target set");
  const Tensor& tp = value(probs);
  const std::size_t k = tp.cols();
  require(k >= 2, "cw_margin_mean: need at least two classes");
  // Per target: p_true - max_{j != y} p_j; argmax ties break to lowest id.
  std::vector<std::size_t> best(targets.size());
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::size_t r = targets[i];
    require(r < tp.rows(), "cw_margin_mean: target out of range");
    const int y = labels[r];
    require(y >= 0 && static_cast<std::size_t>(y) < k,
            "cw_margin_mean: label out of range");
    std::size_t bj = k;  // sentinel
    for (std::size_t j = 0; j < k; ++j) {
      if (j == static_cast<std::size_t>(y)) continue;
      if (bj == k || tp.at(r, j) > tp.at(r, bj)) bj = j;
    }
    best[i] = bj;
    total += tp.at(r, static_cast<std::size_t>(y)) - tp.at(r, bj);
  }
  const double inv = 1.0 / static_cast<double>(targets.size());
  return emplace(
      Tensor::scalar(total * inv),
      [probs, targets = std::move(targets), best = std::move(best), labels,
       inv](Tape& t, const Tensor& g) {
        Tensor& gp = t.grad_buf(probs.id);
        for (std::size_t i = 0; i < targets.size(); ++i) {
          const std::size_t r = targets[i];
          gp.at(r, static_cast<std::size_t>(labels[r])) += g[0] * inv;
          gp.at(r, best[i]) -= g[0] * inv;
        }
      });
}

}  // namespace cana::num
