#pragma once

#include <cstddef>

#include "satcn/array.hpp"
#include "satcn/graph.hpp"
#include "satcn/sampling.hpp"

namespace satcn {

constexpr std::size_t kNumAggregators = 7;  // mu, wmean, softmax, softmin, std, mu_d, sigma_d
constexpr std::size_t kNumScalers = 3;      // identity, amplification, attenuation
constexpr std::size_t kStackFactor = kNumAggregators * kNumScalers;  // 21

/// Spatial aggregation layer parameters. The stacked feature layout consumed
/// by `phi` is scaler-major: index (s*7 + a)*c_in + channel with aggregator
/// order [mean, weighted mean, softmax, softmin, std, mean distance, std
/// distance deviation] and scaler order [identity, amplification,
/// attenuation]. Weights are portable across implementations that honor this
/// ordering.
struct SanLayerParams {
  enum class Activation { Relu, Identity };

  Array phi;   // [c_out, 21 * c_in]
  Array bias;  // [c_out]
  Activation activation = Activation::Relu;
  double epsilon = 1e-5;  // variance floor inside the std aggregators
  double deg = 1.0;       // training-graph amplification baseline

  std::size_t c_out() const { return phi.dim(0); }
  std::size_t c_in() const { return phi.dim(1) / kStackFactor; }
};

/// Average log-degree of the full training graph:
/// deg = (1/n) sum_i log(1 + sum of incoming weights of i).
/// Throws on an empty graph or when deg comes out non-positive (degenerate
/// geometry: every node's incoming weight sum is zero).
double compute_deg(const NeighborGraph& g);

// Per-time-slice kernels. Node i's channel block starts at i*stride (stride
// = c for a contiguous [n, c] slice, T*c for a column of an [n, T, c]
// block). Shared between the value-mode API below and the autodiff tape ops
// so both routes compute the same numbers. Empty neighborhoods produce 0 in
// every aggregator.
namespace agg {

void mean(const double* x, std::size_t x_stride, std::size_t n, std::size_t c,
          const NeighborGraph& g, double* out, std::size_t out_stride);
void weighted_mean(const double* x, std::size_t x_stride, std::size_t n,
                   std::size_t c, const NeighborGraph& g, double* out,
                   std::size_t out_stride);
void softmax(const double* x, std::size_t x_stride, std::size_t n,
             std::size_t c, const NeighborGraph& g, double* out,
             std::size_t out_stride);
void softmin(const double* x, std::size_t x_stride, std::size_t n,
             std::size_t c, const NeighborGraph& g, double* out,
             std::size_t out_stride);
void stddev(const double* x, std::size_t x_stride, std::size_t n,
            std::size_t c, const NeighborGraph& g, double epsilon, double* out,
            std::size_t out_stride);

/// Distance statistics per node: mu_d[i], sigma_d[i] (not broadcast).
void dist_stats(const NeighborGraph& g, double epsilon, double* mu_d,
                double* sigma_d);

/// Per-node scaler factors. amp[i] = log1p(sum_w_i)/deg; att[i] =
/// deg/log1p(sum_w_i), forced to 0 when the incoming weight sum is 0.
void scaler_factors(const NeighborGraph& g, double deg, double* amp,
                    double* att);

}  // namespace agg

/// The seven aggregator outputs for one time slice: [n, c] -> [n, 7, c].
Array aggregate(const Array& features, const NeighborGraph& g, double epsilon);

/// Scaler stack: [n, 7, c] -> [n, 21, c] as [agg, amp*agg, att*agg].
Array scale(const Array& agg7, const NeighborGraph& g, double deg);

/// Full SAN layer on a spatiotemporal block: [n, T, c_in] -> [n, T, c_out].
/// The graph sequence supplies one graph for all slices or one per slice.
Array san_forward(const Array& x, const GraphSeq& g, const SanLayerParams& p);

}  // namespace satcn
