#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "satcn/array.hpp"
#include "satcn/graph.hpp"
#include "satcn/rng.hpp"

namespace satcn {

/// n x T signal matrix with an explicit observation mask (true = observed).
/// Values at unobserved cells are carried but never consumed.
struct TimeSeriesPanel {
  Array values;                        // [n, T]
  std::vector<std::uint8_t> obs_mask;  // n*T, row-major [n, T]
  std::string freq_label;

  std::size_t nodes() const { return values.rank() == 2 ? values.dim(0) : 0; }
  std::size_t steps() const { return values.rank() == 2 ? values.dim(1) : 0; }

  bool observed(std::size_t i, std::size_t t) const {
    return obs_mask[i * steps() + t] != 0;
  }
  void set_observed(std::size_t i, std::size_t t, bool v) {
    obs_mask[i * steps() + t] = v ? 1 : 0;
  }

  static TimeSeriesPanel fully_observed(Array values, std::string freq = {});
};

/// z-score statistics over observed entries only. A constant (or empty)
/// panel falls back to std = 1 so normalization stays invertible.
struct Normalization {
  double mean = 0.0;
  double std = 1.0;

  double apply(double v) const { return (v - mean) / std; }
  double invert(double v) const { return v * std + mean; }
};

Normalization compute_normalization(const TimeSeriesPanel& panel);

/// Masked adjacency for one training window: one graph when node
/// availability is constant across the window, else one graph per column.
struct GraphSeq {
  std::vector<NeighborGraph> graphs;

  bool per_column() const { return graphs.size() > 1; }
  const NeighborGraph& at(std::size_t t) const {
    return graphs.size() == 1 ? graphs[0] : graphs[t];
  }
};

struct TrainingSample {
  Array x;                             // [n, h+u] normalized, masked rows zeroed
  Array target;                        // [n, h] raw signal values
  GraphSeq a;                          // masked graph(s) for the first SAN layer
  NeighborGraph a_hat;                 // full graph for subsequent layers
  std::vector<std::size_t> omega;      // simulated-unknown node set
  std::vector<std::uint8_t> eval_mask; // n*h, cells with observed ground truth
  std::size_t window_start = 0;        // first target column (0-based)
};

struct TrainingBatch {
  std::vector<TrainingSample> samples;
};

struct SamplingParams {
  std::size_t h = 6;    // target window length
  std::size_t u = 2;    // temporal reduction of the model
  std::size_t k = 3;    // neighbor count
  std::size_t n_m = 1;  // simulated unknown nodes per sample
  std::size_t batch = 8;
};

TrainingBatch generate_training_batch(const TimeSeriesPanel& panel,
                                      const SensorSet& sensors,
                                      const SamplingParams& params,
                                      const Normalization& norm, Rng& rng);

}  // namespace satcn
