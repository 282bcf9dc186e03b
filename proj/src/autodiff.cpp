#include "satcn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "satcn/aggregation.hpp"
#include "satcn/errors.hpp"

namespace satcn::ad {

namespace {

// [n,T,c] with node stride T*c; slice t starts at offset t*c.
struct Dims3 {
  std::size_t n, T, c;
};

Dims3 dims3(const Array& a, const char* what) {
  if (a.rank() != 3) {
    throw std::invalid_argument(std::string(what) + ": expected [n,T,c] input");
  }
  return {a.dim(0), a.dim(1), a.dim(2)};
}

}  // namespace

NodeId Tape::push(Array value, bool requires_grad,
                  std::function<void(Tape&, const Node&)> backward_fn) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.backward_fn = std::move(backward_fn);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

void Tape::check(NodeId id) const {
  if (id >= nodes_.size()) throw std::invalid_argument("tape: bad node id");
}

Array& Tape::grad_buf(NodeId id) {
  Node& nd = nodes_[id];
  if (nd.grad.empty()) nd.grad = Array(nd.value.shape(), 0.0);
  return nd.grad;
}

const Array& Tape::grad(NodeId id) const {
  check(id);
  const Node& nd = nodes_[id];
  if (!backward_done_) throw std::logic_error("tape: backward not run");
  if (nd.grad.empty()) throw std::logic_error("tape: node has no gradient");
  return nd.grad;
}

NodeId Tape::leaf(Array value) { return push(std::move(value), true, nullptr); }

NodeId Tape::constant(Array value) { return push(std::move(value), false, nullptr); }

NodeId Tape::linear(NodeId x, NodeId weight, NodeId bias) {
  check(x);
  check(weight);
  check(bias);
  const auto [n, T, cin] = dims3(nodes_[x].value, "linear");
  const Array& W = nodes_[weight].value;
  const Array& b = nodes_[bias].value;
  if (W.rank() != 2 || W.dim(1) != cin) {
    throw std::invalid_argument("linear: weight must be [c_out, c_in]");
  }
  const std::size_t cout = W.dim(0);
  if (b.size() != cout) throw std::invalid_argument("linear: bias mismatch");

  Array y({n, T, cout}, 0.0);
  const Array& xv = nodes_[x].value;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      const double* xr = xv.data() + (i * T + t) * cin;
      double* yr = y.data() + (i * T + t) * cout;
      for (std::size_t o = 0; o < cout; ++o) {
        const double* wr = W.data() + o * cin;
        double acc = b[o];
        for (std::size_t q = 0; q < cin; ++q) acc += wr[q] * xr[q];
        yr[o] = acc;
      }
    }
  }

  const bool rg = nodes_[x].requires_grad || nodes_[weight].requires_grad ||
                  nodes_[bias].requires_grad;
  return push(std::move(y), rg, [x, weight, bias, n = n, T = T, cin = cin,
                                 cout](Tape& tape, const Node& self) {
    const Array& gy = self.grad;
    const Array& xv = tape.nodes_[x].value;
    const Array& W = tape.nodes_[weight].value;
    const bool need_x = tape.nodes_[x].requires_grad;
    const bool need_w = tape.nodes_[weight].requires_grad;
    const bool need_b = tape.nodes_[bias].requires_grad;
    Array* gx = need_x ? &tape.grad_buf(x) : nullptr;
    Array* gw = need_w ? &tape.grad_buf(weight) : nullptr;
    Array* gb = need_b ? &tape.grad_buf(bias) : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < T; ++t) {
        const double* gyr = gy.data() + (i * T + t) * cout;
        const double* xr = xv.data() + (i * T + t) * cin;
        double* gxr = need_x ? gx->data() + (i * T + t) * cin : nullptr;
        for (std::size_t o = 0; o < cout; ++o) {
          const double g = gyr[o];
          if (g == 0.0) continue;
          const double* wr = W.data() + o * cin;
          if (need_x) {
            for (std::size_t q = 0; q < cin; ++q) gxr[q] += g * wr[q];
          }
          if (need_w) {
            double* gwr = gw->data() + o * cin;
            for (std::size_t q = 0; q < cin; ++q) gwr[q] += g * xr[q];
          }
          if (need_b) (*gb)[o] += g;
        }
      }
    }
  });
}

NodeId Tape::conv1d(NodeId x, NodeId kernel, NodeId bias) {
  check(x);
  check(kernel);
  check(bias);
  const auto [n, T, cin] = dims3(nodes_[x].value, "conv1d");
  const Array& K = nodes_[kernel].value;
  const Array& b = nodes_[bias].value;
  if (K.rank() != 3 || K.dim(1) != cin) {
    throw std::invalid_argument("conv1d: kernel must be [w, c_in, c_out]");
  }
  const std::size_t w = K.dim(0), cout = K.dim(2);
  if (b.size() != cout) throw std::invalid_argument("conv1d: bias mismatch");
  if (T < w) throw std::invalid_argument("conv1d: input shorter than kernel");
  const std::size_t Tout = T - w + 1;

  Array y({n, Tout, cout}, 0.0);
  const Array& xv = nodes_[x].value;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < Tout; ++t) {
      double* yr = y.data() + (i * Tout + t) * cout;
      for (std::size_t o = 0; o < cout; ++o) yr[o] = b[o];
      for (std::size_t tau = 0; tau < w; ++tau) {
        const double* xr = xv.data() + (i * T + t + tau) * cin;
        for (std::size_t a = 0; a < cin; ++a) {
          const double xa = xr[a];
          if (xa == 0.0) continue;
          const double* kr = K.data() + (tau * cin + a) * cout;
          for (std::size_t o = 0; o < cout; ++o) yr[o] += kr[o] * xa;
        }
      }
    }
  }

  const bool rg = nodes_[x].requires_grad || nodes_[kernel].requires_grad ||
                  nodes_[bias].requires_grad;
  return push(std::move(y), rg, [x, kernel, bias, n = n, T = T, cin = cin, w,
                                 cout, Tout](Tape& tape, const Node& self) {
    const Array& gy = self.grad;
    const Array& xv = tape.nodes_[x].value;
    const Array& K = tape.nodes_[kernel].value;
    const bool need_x = tape.nodes_[x].requires_grad;
    const bool need_k = tape.nodes_[kernel].requires_grad;
    const bool need_b = tape.nodes_[bias].requires_grad;
    Array* gx = need_x ? &tape.grad_buf(x) : nullptr;
    Array* gk = need_k ? &tape.grad_buf(kernel) : nullptr;
    Array* gb = need_b ? &tape.grad_buf(bias) : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < Tout; ++t) {
        const double* gyr = gy.data() + (i * Tout + t) * cout;
        for (std::size_t tau = 0; tau < w; ++tau) {
          const double* xr = xv.data() + (i * T + t + tau) * cin;
          double* gxr = need_x ? gx->data() + (i * T + t + tau) * cin : nullptr;
          for (std::size_t a = 0; a < cin; ++a) {
            const double* kr = K.data() + (tau * cin + a) * cout;
            double* gkr = need_k ? gk->data() + (tau * cin + a) * cout : nullptr;
            double acc = 0.0;
            for (std::size_t o = 0; o < cout; ++o) {
              const double g = gyr[o];
              acc += g * kr[o];
              if (need_k) gkr[o] += g * xr[a];
            }
            if (need_x) gxr[a] += acc;
          }
        }
        if (need_b) {
          for (std::size_t o = 0; o < cout; ++o) (*gb)[o] += gyr[o];
        }
      }
    }
  });
}

NodeId Tape::relu(NodeId x) {
  check(x);
  Array y = nodes_[x].value;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::max(y[i], 0.0);
  return push(std::move(y), nodes_[x].requires_grad,
              [x](Tape& tape, const Node& self) {
                if (!tape.nodes_[x].requires_grad) return;
                Array& gx = tape.grad_buf(x);
                const Array& xv = tape.nodes_[x].value;
                const Array& gy = self.grad;
                for (std::size_t i = 0; i < gx.size(); ++i) {
                  if (xv[i] > 0.0) gx[i] += gy[i];  // subgradient 0 at 0
                }
              });
}

NodeId Tape::neg(NodeId x) { return affine(x, -1.0, 0.0); }

NodeId Tape::affine(NodeId x, double mul, double add) {
  check(x);
  Array y = nodes_[x].value;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = mul * y[i] + add;
  return push(std::move(y), nodes_[x].requires_grad,
              [x, mul](Tape& tape, const Node& self) {
                if (!tape.nodes_[x].requires_grad) return;
                Array& gx = tape.grad_buf(x);
                const Array& gy = self.grad;
                for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += mul * gy[i];
              });
}

NodeId Tape::square(NodeId x) {
  check(x);
  Array y = nodes_[x].value;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= y[i];
  return push(std::move(y), nodes_[x].requires_grad,
              [x](Tape& tape, const Node& self) {
                if (!tape.nodes_[x].requires_grad) return;
                Array& gx = tape.grad_buf(x);
                const Array& xv = tape.nodes_[x].value;
                const Array& gy = self.grad;
                for (std::size_t i = 0; i < gx.size(); ++i) {
                  gx[i] += 2.0 * xv[i] * gy[i];
                }
              });
}

NodeId Tape::neighbor_mean(NodeId x, GraphRef g) {
  check(x);
  const auto [n, T, c] = dims3(nodes_[x].value, "neighbor_mean");
  Array y({n, T, c}, 0.0);
  const Array& xv = nodes_[x].value;
  for (std::size_t t = 0; t < T; ++t) {
    agg::mean(xv.data() + t * c, T * c, n, c, g.at(t), y.data() + t * c, T * c);
  }
  return push(std::move(y), nodes_[x].requires_grad,
              [x, g, n = n, T = T, c = c](Tape& tape, const Node& self) {
                if (!tape.nodes_[x].requires_grad) return;
                Array& gx = tape.grad_buf(x);
                const Array& gy = self.grad;
                for (std::size_t t = 0; t < T; ++t) {
                  const NeighborGraph& gt = g.at(t);
                  for (std::size_t i = 0; i < n; ++i) {
                    const auto& edges = gt.receivers[i];
                    if (edges.empty()) continue;
                    const double inv = 1.0 / static_cast<double>(edges.size());
                    const double* gyr = gy.data() + (i * T + t) * c;
                    for (const auto& e : edges) {
                      double* gxr = gx.data() + (e.sender * T + t) * c;
                      for (std::size_t ch = 0; ch < c; ++ch) {
                        gxr[ch] += gyr[ch] * inv;
                      }
                    }
                  }
                }
              });
}

NodeId Tape::neighbor_weighted_mean(NodeId x, GraphRef g) {
  check(x);
  const auto [n, T, c] = dims3(nodes_[x].value, "neighbor_weighted_mean");
  Array y({n, T, c}, 0.0);
  const Array& xv = nodes_[x].value;
  for (std::size_t t = 0; t < T; ++t) {
    agg::weighted_mean(xv.data() + t * c, T * c, n, c, g.at(t),
                       y.data() + t * c, T * c);
  }
  return push(std::move(y), nodes_[x].requires_grad,
              [x, g, n = n, T = T, c = c](Tape& tape, const Node& self) {
                if (!tape.nodes_[x].requires_grad) return;
                Array& gx = tape.grad_buf(x);
                const Array& gy = self.grad;
                for (std::size_t t = 0; t < T; ++t) {
                  const NeighborGraph& gt = g.at(t);
                  for (std::size_t i = 0; i < n; ++i) {
                    const auto& edges = gt.receivers[i];
                    double wsum = 0.0;
                    for (const auto& e : edges) wsum += e.weight;
                    if (edges.empty() || wsum <= 0.0) continue;
                    const double inv = 1.0 / wsum;
                    const double* gyr = gy.data() + (i * T + t) * c;
                    for (const auto& e : edges) {
                      const double f = e.weight * inv;
                      if (f == 0.0) continue;
                      double* gxr = gx.data() + (e.sender * T + t) * c;
                      for (std::size_t ch = 0; ch < c; ++ch) {
                        gxr[ch] += gyr[ch] * f;
                      }
                    }
                  }
                }
              });
}

NodeId Tape::neighbor_softmax(NodeId x, GraphRef g) {
  check(x);
  const auto [n, T, c] = dims3(nodes_[x].value, "neighbor_softmax");
  Array y({n, T, c}, 0.0);
  const Array& xv = nodes_[x].value;
  for (std::size_t t = 0; t < T; ++t) {
    agg::softmax(xv.data() + t * c, T * c, n, c, g.at(t), y.data() + t * c,
                 T * c);
  }
  // d softmax_i / d x_m = p_m * (1 + x_m - y_i) for m in N(i).
  return push(std::move(y), nodes_[x].requires_grad,
              [x, g, n = n, T = T, c = c](Tape& tape, const Node& self) {
                if (!tape.nodes_[x].requires_grad) return;
                Array& gx = tape.grad_buf(x);
                const Array& gy = self.grad;
                const Array& xv = tape.nodes_[x].value;
                const Array& yv = self.value;
                for (std::size_t t = 0; t < T; ++t) {
                  const NeighborGraph& gt = g.at(t);
                  for (std::size_t i = 0; i < n; ++i) {
                    const auto& edges = gt.receivers[i];
                    if (edges.empty()) continue;
                    const double* gyr = gy.data() + (i * T + t) * c;
                    const double* yr = yv.data() + (i * T + t) * c;
                    for (std::size_t ch = 0; ch < c; ++ch) {
                      const double gout = gyr[ch];
                      if (gout == 0.0) continue;
                      double m = -std::numeric_limits<double>::infinity();
                      for (const auto& e : edges) {
                        m = std::max(m, xv[(e.sender * T + t) * c + ch]);
                      }
                      double z = 0.0;
                      for (const auto& e : edges) {
                        z += std::exp(xv[(e.sender * T + t) * c + ch] - m);
                      }
                      const double yi = yr[ch];
                      for (const auto& e : edges) {
                        const double xm = xv[(e.sender * T + t) * c + ch];
                        const double p = std::exp(xm - m) / z;
                        gx[(e.sender * T + t) * c + ch] +=
                            gout * p * (1.0 + xm - yi);
                      }
                    }
                  }
                }
              });
}

NodeId Tape::neighbor_std(NodeId x, GraphRef g, double epsilon) {
  check(x);
  const auto [n, T, c] = dims3(nodes_[x].value, "neighbor_std");
  Array y({n, T, c}, 0.0);
  const Array& xv = nodes_[x].value;
  for (std::size_t t = 0; t < T; ++t) {
    agg::stddev(xv.data() + t * c, T * c, n, c, g.at(t), epsilon,
                y.data() + t * c, T * c);
  }
  // y = sqrt(relu(var) + eps); d y / d x_j = (x_j - mean)/(count * y) when
  // var > 0, else 0 (relu subgradient).
  return push(std::move(y), nodes_[x].requires_grad,
              [x, g, n = n, T = T, c = c](Tape& tape, const Node& self) {
                if (!tape.nodes_[x].requires_grad) return;
                Array& gx = tape.grad_buf(x);
                const Array& gy = self.grad;
                const Array& xv = tape.nodes_[x].value;
                const Array& yv = self.value;
                for (std::size_t t = 0; t < T; ++t) {
                  const NeighborGraph& gt = g.at(t);
                  for (std::size_t i = 0; i < n; ++i) {
                    const auto& edges = gt.receivers[i];
                    if (edges.empty()) continue;
                    const double inv = 1.0 / static_cast<double>(edges.size());
                    const double* gyr = gy.data() + (i * T + t) * c;
                    const double* yr = yv.data() + (i * T + t) * c;
                    for (std::size_t ch = 0; ch < c; ++ch) {
                      const double gout = gyr[ch];
                      if (gout == 0.0) continue;
                      double s1 = 0.0, s2 = 0.0;
                      for (const auto& e : edges) {
                        const double v = xv[(e.sender * T + t) * c + ch];
                        s1 += v;
                        s2 += v * v;
                      }
                      const double m1 = s1 * inv;
                      const double var = s2 * inv - m1 * m1;
                      if (var <= 0.0) continue;
                      const double yi = yr[ch];
                      const double f = gout * inv / yi;
                      for (const auto& e : edges) {
                        const double v = xv[(e.sender * T + t) * c + ch];
                        gx[(e.sender * T + t) * c + ch] += f * (v - m1);
                      }
                    }
                  }
                }
              });
}

NodeId Tape::concat_channels(const std::vector<NodeId>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: no inputs");
  std::size_t n = 0, T = 0, ctotal = 0;
  bool rg = false;
  for (std::size_t idx = 0; idx < xs.size(); ++idx) {
    check(xs[idx]);
    const auto d = dims3(nodes_[xs[idx]].value, "concat_channels");
    if (idx == 0) {
      n = d.n;
      T = d.T;
    } else if (d.n != n || d.T != T) {
      throw std::invalid_argument("concat_channels: shape mismatch");
    }
    ctotal += d.c;
    rg = rg || nodes_[xs[idx]].requires_grad;
  }

  Array y({n, T, ctotal}, 0.0);
  std::size_t off = 0;
  for (NodeId id : xs) {
    const Array& xv = nodes_[id].value;
    const std::size_t c = xv.dim(2);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < T; ++t) {
        const double* src = xv.data() + (i * T + t) * c;
        double* dst = y.data() + (i * T + t) * ctotal + off;
        std::copy(src, src + c, dst);
      }
    }
    off += c;
  }

  return push(std::move(y), rg,
              [xs, n, T, ctotal](Tape& tape, const Node& self) {
                const Array& gy = self.grad;
                std::size_t off = 0;
                for (NodeId id : xs) {
                  const std::size_t c = tape.nodes_[id].value.dim(2);
                  if (tape.nodes_[id].requires_grad) {
                    Array& gx = tape.grad_buf(id);
                    for (std::size_t i = 0; i < n; ++i) {
                      for (std::size_t t = 0; t < T; ++t) {
                        const double* src = gy.data() + (i * T + t) * ctotal + off;
                        double* dst = gx.data() + (i * T + t) * c;
                        for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
                      }
                    }
                  }
                  off += c;
                }
              });
}

NodeId Tape::row_scale(NodeId x, Array factors) {
  check(x);
  const auto [n, T, c] = dims3(nodes_[x].value, "row_scale");
  if (factors.rank() != 2 || factors.dim(0) != n || factors.dim(1) != T) {
    throw std::invalid_argument("row_scale: factors must be [n, T]");
  }
  Array y({n, T, c}, 0.0);
  const Array& xv = nodes_[x].value;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      const double f = factors.at(i, t);
      const double* src = xv.data() + (i * T + t) * c;
      double* dst = y.data() + (i * T + t) * c;
      for (std::size_t ch = 0; ch < c; ++ch) dst[ch] = f * src[ch];
    }
  }
  return push(std::move(y), nodes_[x].requires_grad,
              [x, factors = std::move(factors), n = n, T = T,
               c = c](Tape& tape, const Node& self) {
                if (!tape.nodes_[x].requires_grad) return;
                Array& gx = tape.grad_buf(x);
                const Array& gy = self.grad;
                for (std::size_t i = 0; i < n; ++i) {
                  for (std::size_t t = 0; t < T; ++t) {
                    const double f = factors.at(i, t);
                    const double* src = gy.data() + (i * T + t) * c;
                    double* dst = gx.data() + (i * T + t) * c;
                    for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += f * src[ch];
                  }
                }
              });
}

NodeId Tape::squeeze_last(NodeId x) {
  check(x);
  const auto [n, T, c] = dims3(nodes_[x].value, "squeeze_last");
  if (c != 1) throw std::invalid_argument("squeeze_last: trailing dim must be 1");
  Array y = Array::from({n, T}, nodes_[x].value.storage());
  return push(std::move(y), nodes_[x].requires_grad,
              [x](Tape& tape, const Node& self) {
                if (!tape.nodes_[x].requires_grad) return;
                Array& gx = tape.grad_buf(x);
                const Array& gy = self.grad;
                for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
              });
}

NodeId Tape::masked_mae(NodeId pred, Array target,
                        std::vector<std::uint8_t> mask) {
  check(pred);
  const Array& pv = nodes_[pred].value;
  if (!pv.same_shape(target)) {
    throw std::invalid_argument("masked_mae: pred/target shape mismatch");
  }
  if (mask.size() != pv.size()) {
    throw std::invalid_argument("masked_mae: mask size mismatch");
  }
  std::size_t cnt = 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (mask[i]) {
      acc += std::abs(pv[i] - target[i]);
      ++cnt;
    }
  }
  if (cnt == 0) throw std::invalid_argument("masked_mae: empty evaluation mask");
  Array y({1}, acc / static_cast<double>(cnt));

  return push(std::move(y), nodes_[pred].requires_grad,
              [pred, target = std::move(target), mask = std::move(mask),
               cnt](Tape& tape, const Node& self) {
                if (!tape.nodes_[pred].requires_grad) return;
                Array& gp = tape.grad_buf(pred);
                const Array& pv = tape.nodes_[pred].value;
                const double g = self.grad[0] / static_cast<double>(cnt);
                for (std::size_t i = 0; i < gp.size(); ++i) {
                  if (!mask[i]) continue;
                  const double d = pv[i] - target[i];
                  if (d > 0.0) {
                    gp[i] += g;
                  } else if (d < 0.0) {
                    gp[i] -= g;  // subgradient 0 at d == 0
                  }
                }
              });
}

NodeId Tape::scaled_sum(const std::vector<NodeId>& scalars, double scale) {
  if (scalars.empty()) throw std::invalid_argument("scaled_sum: no inputs");
  double acc = 0.0;
  bool rg = false;
  for (NodeId id : scalars) {
    check(id);
    if (nodes_[id].value.size() != 1) {
      throw std::invalid_argument("scaled_sum: inputs must be scalar");
    }
    acc += nodes_[id].value[0];
    rg = rg || nodes_[id].requires_grad;
  }
  Array y({1}, acc * scale);
  return push(std::move(y), rg, [scalars, scale](Tape& tape, const Node& self) {
    const double g = self.grad[0] * scale;
    for (NodeId id : scalars) {
      if (tape.nodes_[id].requires_grad) tape.grad_buf(id)[0] += g;
    }
  });
}

void Tape::backward(NodeId loss) {
  check(loss);
  if (backward_done_) throw std::logic_error("tape: backward already run");
  if (nodes_[loss].value.size() != 1) {
    throw std::invalid_argument("tape: loss must be scalar");
  }
  backward_done_ = true;
  grad_buf(loss)[0] = 1.0;
  for (std::size_t idx = loss + 1; idx-- > 0;) {
    Node& nd = nodes_[idx];
    if (!nd.requires_grad || !nd.backward_fn || nd.grad.empty()) continue;
    nd.backward_fn(*this, nd);
  }
  // Disconnected leaves still report a (zero) gradient of matching shape.
  for (Node& nd : nodes_) {
    if (nd.requires_grad && nd.grad.empty()) {
      nd.grad = Array(nd.value.shape(), 0.0);
    }
  }
}

FiniteDiffReport finite_difference_check(
    const std::function<double()>& f,
    const std::vector<std::pair<std::string, Array*>>& params,
    const std::vector<const Array*>& analytic, double step) {
  if (step <= 0.0) throw std::invalid_argument("finite_difference_check: step <= 0");
  if (params.size() != analytic.size()) {
    throw std::invalid_argument("finite_difference_check: params/grads mismatch");
  }
  FiniteDiffReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Array& tensor = *params[p].second;
    const Array& grad = *analytic[p];
    if (!tensor.same_shape(grad)) {
      throw std::invalid_argument("finite_difference_check: grad shape mismatch");
    }
    for (std::size_t idx = 0; idx < tensor.size(); ++idx) {
      const double saved = tensor[idx];
      tensor[idx] = saved + step;
      const double f_plus = f();
      tensor[idx] = saved - step;
      const double f_minus = f();
      tensor[idx] = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        throw NumericalError("finite_difference_check: non-finite objective");
      }
      const double numeric = (f_plus - f_minus) / (2.0 * step);
      const double a = grad[idx];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_tensor = params[p].first;
        report.worst_index = idx;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace satcn::ad
