#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "satcn/baselines.hpp"
#include "satcn/model.hpp"

namespace satcn {

/// Full finite-difference audit of the default (or given) architecture:
/// analytic tape gradients of the batch MAE versus central differences of
/// the value-mode forward, swept over every coordinate of every parameter
/// tensor on each instance.
struct GradcheckInstance {
  std::size_t n = 6;
  std::size_t h = 4;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  double tolerance = 1e-4;
  bool pass = false;
  std::size_t parameters_checked = 0;
};

GradcheckReport run_gradient_check(
    const ArchConfig& arch, std::uint64_t seed, double step = 1e-5,
    double tolerance = 1e-4,
    const std::vector<GradcheckInstance>& instances = {{4, 2}, {6, 4}});

/// Train-and-evaluate pipeline for one scenario: SATCN against the kNN
/// baseline family on identical evaluation cells (test sensors, test
/// period, columns >= u so both methods score the same set).
struct ScenarioResult {
  MetricReport satcn;
  std::vector<std::pair<std::size_t, MetricReport>> knn;  // (K, metrics)
  TrainHistory history;
  std::size_t eval_cells = 0;

  double best_knn_mae() const;
};

ScenarioResult run_scenario_experiment(
    const TimeSeriesPanel& panel, const SensorSet& sensors,
    const ScenarioSpec& scenario, const ArchConfig& arch,
    const TrainConfig& train_cfg, const std::vector<std::size_t>& knn_ks,
    const Array* truth = nullptr /* optional noiseless [n, T] oracle */);

}  // namespace satcn
