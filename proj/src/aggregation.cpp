#include "satcn/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace satcn {

double compute_deg(const NeighborGraph& g) {
  const std::size_t n = g.node_count();
  if (n == 0) throw std::invalid_argument("compute_deg: empty graph");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += std::log1p(g.incoming_weight_sum(i));
  }
  const double deg = acc / static_cast<double>(n);
  if (deg <= 0.0) {
    throw std::invalid_argument(
        "compute_deg: degenerate graph (every incoming weight sum is 0)");
  }
  return deg;
}

namespace agg {

void mean(const double* x, std::size_t x_stride, std::size_t n, std::size_t c,
          const NeighborGraph& g, double* out, std::size_t out_stride) {
  for (std::size_t i = 0; i < n; ++i) {
    const auto& edges = g.receivers[i];
    double* o = out + i * out_stride;
    if (edges.empty()) {
      std::fill(o, o + c, 0.0);
      continue;
    }
    const double inv = 1.0 / static_cast<double>(edges.size());
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (const auto& e : edges) s += x[e.sender * x_stride + ch];
      o[ch] = s * inv;
    }
  }
}

void weighted_mean(const double* x, std::size_t x_stride, std::size_t n,
                   std::size_t c, const NeighborGraph& g, double* out,
                   std::size_t out_stride) {
  for (std::size_t i = 0; i < n; ++i) {
    const auto& edges = g.receivers[i];
    double* o = out + i * out_stride;
    double wsum = 0.0;
    for (const auto& e : edges) wsum += e.weight;
    if (edges.empty() || wsum <= 0.0) {
      std::fill(o, o + c, 0.0);
      continue;
    }
    const double inv = 1.0 / wsum;
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (const auto& e : edges) s += e.weight * x[e.sender * x_stride + ch];
      o[ch] = s * inv;
    }
  }
}

void softmax(const double* x, std::size_t x_stride, std::size_t n,
             std::size_t c, const NeighborGraph& g, double* out,
             std::size_t out_stride) {
  for (std::size_t i = 0; i < n; ++i) {
    const auto& edges = g.receivers[i];
    double* o = out + i * out_stride;
    if (edges.empty()) {
      std::fill(o, o + c, 0.0);
      continue;
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      double m = -std::numeric_limits<double>::infinity();
      for (const auto& e : edges) m = std::max(m, x[e.sender * x_stride + ch]);
      double z = 0.0, acc = 0.0;
      for (const auto& e : edges) {
        const double v = x[e.sender * x_stride + ch];
        const double w = std::exp(v - m);
        z += w;
        acc += v * w;
      }
      o[ch] = acc / z;
    }
  }
}

void softmin(const double* x, std::size_t x_stride, std::size_t n,
             std::size_t c, const NeighborGraph& g, double* out,
             std::size_t out_stride) {
  // softmin(x) = -softmax(-x)
  std::vector<double> negx(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      negx[i * c + ch] = -x[i * x_stride + ch];
    }
  }
  softmax(negx.data(), c, n, c, g, out, out_stride);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      out[i * out_stride + ch] = -out[i * out_stride + ch];
    }
  }
}

void stddev(const double* x, std::size_t x_stride, std::size_t n,
            std::size_t c, const NeighborGraph& g, double epsilon, double* out,
            std::size_t out_stride) {
  for (std::size_t i = 0; i < n; ++i) {
    const auto& edges = g.receivers[i];
    double* o = out + i * out_stride;
    if (edges.empty()) {
      std::fill(o, o + c, 0.0);  // overrides the sqrt(eps) floor
      continue;
    }
    const double inv = 1.0 / static_cast<double>(edges.size());
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s1 = 0.0, s2 = 0.0;
      for (const auto& e : edges) {
        const double v = x[e.sender * x_stride + ch];
        s1 += v;
        s2 += v * v;
      }
      const double m1 = s1 * inv;
      const double var = s2 * inv - m1 * m1;
      o[ch] = std::sqrt(std::max(var, 0.0) + epsilon);
    }
  }
}

void dist_stats(const NeighborGraph& g, double epsilon, double* mu_d,
                double* sigma_d) {
  const std::size_t n = g.node_count();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& edges = g.receivers[i];
    if (edges.empty()) {
      mu_d[i] = 0.0;
      sigma_d[i] = 0.0;
      continue;
    }
    const double inv = 1.0 / static_cast<double>(edges.size());
    double s1 = 0.0, s2 = 0.0;
    for (const auto& e : edges) {
      s1 += e.weight;
      s2 += e.weight * e.weight;
    }
    const double m1 = s1 * inv;
    const double var = s2 * inv - m1 * m1;
    mu_d[i] = m1;
    sigma_d[i] = std::sqrt(std::max(var, 0.0) + epsilon);
  }
}

void scaler_factors(const NeighborGraph& g, double deg, double* amp,
                    double* att) {
  if (deg <= 0.0) throw std::invalid_argument("scaler_factors: deg must be > 0");
  const std::size_t n = g.node_count();
  for (std::size_t i = 0; i < n; ++i) {
    const double l = std::log1p(g.incoming_weight_sum(i));
    amp[i] = l / deg;
    att[i] = l > 0.0 ? deg / l : 0.0;
  }
}

}  // namespace agg

Array aggregate(const Array& features, const NeighborGraph& g, double epsilon) {
  if (features.rank() != 2) {
    throw std::invalid_argument("aggregate: features must be [n, c]");
  }
  const std::size_t n = features.dim(0), c = features.dim(1);
  if (g.node_count() != n) {
    throw std::invalid_argument("aggregate: graph/feature node count mismatch");
  }

  Array out({n, kNumAggregators, c}, 0.0);
  const double* x = features.data();
  const std::size_t ostride = kNumAggregators * c;

  // out.at(i, a, 0) starts at i*ostride + a*c
  agg::mean(x, c, n, c, g, out.data() + 0 * c, ostride);
  agg::weighted_mean(x, c, n, c, g, out.data() + 1 * c, ostride);
  agg::softmax(x, c, n, c, g, out.data() + 2 * c, ostride);
  agg::softmin(x, c, n, c, g, out.data() + 3 * c, ostride);
  agg::stddev(x, c, n, c, g, epsilon, out.data() + 4 * c, ostride);

  std::vector<double> mu_d(n), sigma_d(n);
  agg::dist_stats(g, epsilon, mu_d.data(), sigma_d.data());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {  // broadcast across channels
      out.at(i, 5, ch) = mu_d[i];
      out.at(i, 6, ch) = sigma_d[i];
    }
  }
  return out;
}

Array scale(const Array& agg7, const NeighborGraph& g, double deg) {
  if (agg7.rank() != 3 || agg7.dim(1) != kNumAggregators) {
    throw std::invalid_argument("scale: input must be [n, 7, c]");
  }
  const std::size_t n = agg7.dim(0), c = agg7.dim(2);
  std::vector<double> amp(n), att(n);
  agg::scaler_factors(g, deg, amp.data(), att.data());

  Array out({n, kStackFactor, c}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < kNumAggregators; ++a) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = agg7.at(i, a, ch);
        out.at(i, a, ch) = v;
        out.at(i, kNumAggregators + a, ch) = amp[i] * v;
        out.at(i, 2 * kNumAggregators + a, ch) = att[i] * v;
      }
    }
  }
  return out;
}

Array san_forward(const Array& x, const GraphSeq& g, const SanLayerParams& p) {
  if (x.rank() != 3) {
    throw std::invalid_argument("san_forward: input must be [n, T, c_in]");
  }
  const std::size_t n = x.dim(0), T = x.dim(1), cin = x.dim(2);
  if (p.phi.rank() != 2 || p.phi.dim(1) != kStackFactor * cin) {
    throw std::invalid_argument("san_forward: phi shape mismatch");
  }
  const std::size_t cout = p.c_out();
  if (p.bias.size() != cout) {
    throw std::invalid_argument("san_forward: bias shape mismatch");
  }
  if (g.per_column() && g.graphs.size() != T) {
    throw std::invalid_argument("san_forward: per-column graph count mismatch");
  }

  Array out({n, T, cout}, 0.0);
  Array slice({n, cin}, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const NeighborGraph& gt = g.at(t);
    if (gt.node_count() != n) {
      throw std::invalid_argument("san_forward: graph node count mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t ch = 0; ch < cin; ++ch) slice.at(i, ch) = x.at(i, t, ch);
    }
    const Array stacked = satcn::scale(aggregate(slice, gt, p.epsilon), gt, p.deg);
    const std::size_t flat = kStackFactor * cin;
    for (std::size_t i = 0; i < n; ++i) {
      const double* f = stacked.data() + i * flat;
      for (std::size_t o = 0; o < cout; ++o) {
        const double* w = p.phi.data() + o * flat;
        double acc = p.bias[o];
        for (std::size_t q = 0; q < flat; ++q) acc += w[q] * f[q];
        if (p.activation == SanLayerParams::Activation::Relu && acc < 0.0) {
          acc = 0.0;
        }
        out.at(i, t, o) = acc;
      }
    }
  }
  return out;
}

}  // namespace satcn
