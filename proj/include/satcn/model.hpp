#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "satcn/aggregation.hpp"
#include "satcn/array.hpp"
#include "satcn/graph.hpp"
#include "satcn/rng.hpp"
#include "satcn/sampling.hpp"
#include "satcn/tcn.hpp"

namespace satcn {

/// Network layout: blocks of SAN followed by TCN, repeated, then a shared
/// per-point projection to one channel. The first SAN consumes the masked
/// graph A, all later SANs the full graph A-hat.
struct ArchConfig {
  std::size_t k = 3;
  std::vector<std::size_t> hidden = {32, 32};      // SAN output channels
  std::vector<std::size_t> tcn_widths = {2, 2};    // kernel width per block
  std::size_t n_m = 0;  // simulated unknown nodes; 0 -> max(1, n/20)
  std::size_t h = 6;    // training target window length
  double epsilon = 1e-5;
  bool loss_masked_only = false;  // evaluate loss only on simulated-unknown rows

  std::size_t blocks() const { return hidden.size(); }
  std::size_t u() const {
    std::size_t u = 0;
    for (std::size_t w : tcn_widths) u += w - 1;
    return u;
  }
  void validate() const;
  std::size_t effective_n_m(std::size_t n) const {
    return n_m > 0 ? n_m : std::max<std::size_t>(1, n / 20);
  }
};

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // Cosine decay from lr to lr*lr_floor over the run. The MAE objective has
  // unit-magnitude subgradients, so a constant step keeps the parameters
  // random-walking near the optimum; decay anneals that jitter away.
  double lr_floor = 0.02;
  std::size_t iterations = 500;  // I_max
  std::size_t batch = 8;         // S
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  std::size_t patience = 0;      // 0 disables early stopping
  std::size_t val_every = 25;
  std::size_t val_window = 512;  // columns of the panel tail used for validation
};

struct TrainHistory {
  std::vector<double> train_loss;                     // one entry per iteration
  std::vector<std::pair<std::size_t, double>> val_mae;  // (iteration, mae)
  std::size_t best_iteration = 0;
};

struct SatcnModel {
  ArchConfig arch;
  std::vector<SanLayerParams> san;
  std::vector<TcnLayerParams> tcn;
  Array proj_w;  // [1, c_last]
  Array proj_b;  // [1]
  double deg = 1.0;
  Normalization norm;

  /// All trainable tensors in the fixed (persistence and Adam) order.
  std::vector<std::pair<std::string, Array*>> parameters();
  std::vector<std::pair<std::string, const Array*>> parameters() const;

  /// Sets the shared deg constant on the model and every SAN layer.
  void set_deg(double value);
};

/// Fresh model with uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.
SatcnModel init_model(const ArchConfig& arch, Rng& rng);

/// Value-mode forward pass: x is the normalized [n, T] input with masked
/// rows zeroed; output is the denormalized [n, T - u] estimate for all
/// nodes. Long inputs are processed in overlapping chunks; the unpadded
/// receptive field makes chunking exact.
Array satcn_forward(const Array& x, const GraphSeq& a, const NeighborGraph& a_hat,
                    const SatcnModel& m);

/// Mean absolute error over cells where eval_mask is true.
double mae_loss(const Array& pred, const Array& target,
                const std::vector<std::uint8_t>& eval_mask);

/// Adam-trains a fresh model on the panel. Validation sensors (val_fraction
/// of the panel's nodes) are held out of the sampling pool and periodically
/// kriged from the rest; the validation-best parameters are returned.
SatcnModel train(const TimeSeriesPanel& panel, const SensorSet& sensors,
                 const ArchConfig& arch, const TrainConfig& cfg,
                 TrainHistory* history = nullptr);

/// Estimates signals at `unknown` nodes (indices into all_sensors). The
/// observed panel's rows map to all_sensors indices not in `unknown`, in
/// ascending order. Returns [n_unknown, T - u] aligned with the last T - u
/// input columns.
Array krige(const SatcnModel& m, const TimeSeriesPanel& observed,
            const SensorSet& all_sensors, const std::vector<std::size_t>& unknown);

namespace detail {

/// Unchunked stack evaluation shared by satcn_forward; exposed for tests.
Array forward_block(const Array& x, const GraphSeq& a, const NeighborGraph& a_hat,
                    const SatcnModel& m);

/// Batch loss + parameter gradients via the tape; returns the loss value.
double batch_loss_and_gradients(const SatcnModel& m, const TrainingBatch& batch,
                                bool masked_only, std::vector<Array>& grads);

}  // namespace detail

}  // namespace satcn
