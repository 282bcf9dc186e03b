#include "satcn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

#include "satcn/rng.hpp"

namespace satcn {

Array knn_interpolate(const TimeSeriesPanel& observed, const SensorSet& s,
                      const std::vector<std::size_t>& unknown, std::size_t K) {
  if (K == 0) throw std::invalid_argument("knn_interpolate: K must be >= 1");
  const std::size_t n_all = s.size();
  const std::size_t T = observed.steps();

  std::set<std::size_t> unknown_set(unknown.begin(), unknown.end());
  if (unknown_set.size() != unknown.size()) {
    throw std::invalid_argument("knn_interpolate: duplicate unknown indices");
  }
  for (std::size_t idx : unknown) {
    if (idx >= n_all) {
      throw std::invalid_argument("knn_interpolate: unknown index out of range");
    }
  }
  if (observed.nodes() + unknown.size() != n_all) {
    throw std::invalid_argument(
        "knn_interpolate: observed rows must cover exactly the non-unknown sensors");
  }

  std::vector<std::size_t> obs_index;
  for (std::size_t i = 0; i < n_all; ++i) {
    if (!unknown_set.count(i)) obs_index.push_back(i);
  }

  std::vector<std::size_t> sorted_unknown(unknown.begin(), unknown.end());
  std::sort(sorted_unknown.begin(), sorted_unknown.end());

  Array out({sorted_unknown.size(), T}, 0.0);
  std::vector<std::pair<double, std::size_t>> cand;  // (dist, observed row)
  for (std::size_t r = 0; r < sorted_unknown.size(); ++r) {
    const std::size_t target = sorted_unknown[r];
    // Sort candidates once per target; availability filters per step.
    cand.clear();
    for (std::size_t o = 0; o < obs_index.size(); ++o) {
      cand.emplace_back(s.dist.at(obs_index[o], target), o);
    }
    std::sort(cand.begin(), cand.end(),
              [&](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first < b.first;
                return obs_index[a.second] < obs_index[b.second];
              });
    for (std::size_t t = 0; t < T; ++t) {
      double acc = 0.0;
      std::size_t taken = 0;
      for (const auto& [d, o] : cand) {
        if (!observed.observed(o, t)) continue;
        acc += observed.values.at(o, t);
        if (++taken == K) break;
      }
      if (taken == 0) {
        throw std::invalid_argument(
            "knn_interpolate: no observed sensor available at time step " +
            std::to_string(t));
      }
      out.at(r, t) = acc / static_cast<double>(taken);
    }
  }
  return out;
}

MetricReport evaluate(const Array& pred, const Array& truth,
                      const std::vector<std::uint8_t>& eval_mask) {
  if (!pred.same_shape(truth)) {
    throw std::invalid_argument("evaluate: shape mismatch");
  }
  if (eval_mask.size() != pred.size()) {
    throw std::invalid_argument("evaluate: mask size mismatch");
  }
  double abs_acc = 0.0, sq_acc = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!eval_mask[i]) continue;
    const double d = pred[i] - truth[i];
    abs_acc += std::abs(d);
    sq_acc += d * d;
    ++cnt;
  }
  if (cnt == 0) throw std::invalid_argument("evaluate: empty evaluation mask");
  MetricReport rep;
  rep.count = cnt;
  rep.mae = abs_acc / static_cast<double>(cnt);
  rep.rmse = std::sqrt(sq_acc / static_cast<double>(cnt));
  return rep;
}

Scenario make_scenario(const TimeSeriesPanel& panel, const SensorSet& s,
                       const ScenarioSpec& spec) {
  const std::size_t n = panel.nodes();
  const std::size_t T = panel.steps();
  if (n != s.size()) {
    throw std::invalid_argument("make_scenario: panel/sensor size mismatch");
  }
  if (spec.time_fraction <= 0.0 || spec.time_fraction >= 1.0 ||
      spec.sensor_fraction <= 0.0 || spec.sensor_fraction >= 1.0) {
    throw std::invalid_argument("make_scenario: fractions must lie in (0, 1)");
  }
  if (spec.missing_ratio < 0.0 || spec.missing_ratio >= 1.0) {
    throw std::invalid_argument("make_scenario: missing ratio must lie in [0, 1)");
  }

  const std::size_t n_train = static_cast<std::size_t>(
      std::floor(spec.sensor_fraction * static_cast<double>(n)));
  if (n_train < 2) {
    throw std::invalid_argument("make_scenario: split leaves < 2 training sensors");
  }
  if (n_train >= n) {
    throw std::invalid_argument("make_scenario: split leaves no test sensors");
  }
  const std::size_t t_split = static_cast<std::size_t>(
      std::llround(spec.time_fraction * static_cast<double>(T)));
  if (t_split == 0 || t_split >= T) {
    throw std::invalid_argument("make_scenario: degenerate time split");
  }

  Rng rng(spec.seed);
  Scenario sc;
  sc.t_split = t_split;
  sc.train_sensors = rng.sample_without_replacement(n, n_train);
  {
    std::set<std::size_t> tr(sc.train_sensors.begin(), sc.train_sensors.end());
    for (std::size_t i = 0; i < n; ++i) {
      if (!tr.count(i)) sc.test_sensors.push_back(i);
    }
  }
  sc.train_sensor_set = subset_sensors(s, sc.train_sensors);

  auto copy_block = [&](const std::vector<std::size_t>& rows, std::size_t t0,
                        std::size_t t1) {
    TimeSeriesPanel p;
    p.values = Array({rows.size(), t1 - t0}, 0.0);
    p.obs_mask.assign(rows.size() * (t1 - t0), 0);
    p.freq_label = panel.freq_label;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t t = t0; t < t1; ++t) {
        p.values.at(r, t - t0) = panel.values.at(rows[r], t);
        p.obs_mask[r * (t1 - t0) + (t - t0)] =
            panel.observed(rows[r], t) ? 1 : 0;
      }
    }
    return p;
  };

  sc.train_panel = copy_block(sc.train_sensors, 0, t_split);
  sc.test_input = copy_block(sc.train_sensors, t_split, T);
  sc.test_truth = copy_block(sc.test_sensors, t_split, T);

  // Injected missingness: drop a uniform sample of the observed train cells.
  sc.injected_mask.assign(sc.train_panel.values.size(), 0);
  if (spec.missing_ratio > 0.0) {
    std::vector<std::size_t> observed_cells;
    for (std::size_t idx = 0; idx < sc.train_panel.values.size(); ++idx) {
      if (sc.train_panel.obs_mask[idx]) observed_cells.push_back(idx);
    }
    const std::size_t drop = static_cast<std::size_t>(std::floor(
        spec.missing_ratio * static_cast<double>(observed_cells.size())));
    const std::vector<std::size_t> picks =
        rng.sample_without_replacement(observed_cells.size(), drop);
    for (std::size_t p : picks) {
      const std::size_t cell = observed_cells[p];
      sc.train_panel.obs_mask[cell] = 0;
      sc.injected_mask[cell] = 1;
    }
  }
  return sc;
}

}  // namespace satcn
