#pragma once

#include <cstdint>
#include <vector>

#include "satcn/array.hpp"
#include "satcn/graph.hpp"
#include "satcn/sampling.hpp"

namespace satcn {

struct MetricReport {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t count = 0;
};

/// Per unknown node and time step, the unweighted mean of the K nearest
/// sensors that are observed and available at that step (ties by index;
/// fewer than K available -> all of them). Row r of `observed` maps to the
/// r-th all_sensors index not in `unknown`, ascending.
Array knn_interpolate(const TimeSeriesPanel& observed, const SensorSet& s,
                      const std::vector<std::size_t>& unknown, std::size_t K);

/// RMSE and MAE over cells where eval_mask is true.
MetricReport evaluate(const Array& pred, const Array& truth,
                      const std::vector<std::uint8_t>& eval_mask);

struct ScenarioSpec {
  double time_fraction = 0.7;    // training period share
  double sensor_fraction = 0.8;  // training sensor share
  double missing_ratio = 0.0;    // injected missingness on observed train cells
  std::uint64_t seed = 0;
};

/// Deterministic train/test split plus injected missingness.
struct Scenario {
  std::vector<std::size_t> train_sensors;  // indices into the source set
  std::vector<std::size_t> test_sensors;
  std::size_t t_split = 0;

  TimeSeriesPanel train_panel;     // train sensors x [0, t_split), injected
  SensorSet train_sensor_set;
  TimeSeriesPanel test_input;      // train sensors x [t_split, T), no injection
  TimeSeriesPanel test_truth;      // test sensors x [t_split, T)
  std::vector<std::uint8_t> injected_mask;  // over train_panel cells
};

Scenario make_scenario(const TimeSeriesPanel& panel, const SensorSet& s,
                       const ScenarioSpec& spec);

}  // namespace satcn
