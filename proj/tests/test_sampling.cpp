#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "satcn/graph.hpp"
#include "satcn/rng.hpp"
#include "satcn/sampling.hpp"

using namespace satcn;

namespace {

SensorSet grid_sensors(std::size_t n) {
  std::vector<std::array<double, 2>> coords(n);
  for (std::size_t i = 0; i < n; ++i) {
    coords[i] = {static_cast<double>(i % 3), static_cast<double>(i / 3)};
  }
  return build_distance_matrix(coords, Metric::Euclidean);
}

TimeSeriesPanel ramp_panel(std::size_t n, std::size_t T) {
  Array v({n, T}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      v.at(i, t) = static_cast<double>(i) + 0.1 * static_cast<double>(t);
    }
  }
  return TimeSeriesPanel::fully_observed(std::move(v));
}

bool same_sample(const TrainingSample& a, const TrainingSample& b) {
  if (a.window_start != b.window_start || a.omega != b.omega) return false;
  if (a.x.storage() != b.x.storage()) return false;
  if (a.target.storage() != b.target.storage()) return false;
  if (a.eval_mask != b.eval_mask) return false;
  return true;
}

}  // namespace

TEST_CASE("normalization uses observed cells only") {
  Array v({2, 3}, 0.0);
  v.at(0, 0) = 2.0;
  v.at(0, 1) = 4.0;
  v.at(0, 2) = 100.0;  // unobserved, must be ignored
  v.at(1, 0) = 6.0;
  v.at(1, 1) = 8.0;
  v.at(1, 2) = -100.0;  // unobserved
  TimeSeriesPanel p = TimeSeriesPanel::fully_observed(std::move(v));
  p.set_observed(0, 2, false);
  p.set_observed(1, 2, false);
  const Normalization norm = compute_normalization(p);
  CHECK(norm.mean == doctest::Approx(5.0));
  CHECK(norm.std == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("constant panel falls back to unit std") {
  TimeSeriesPanel p = TimeSeriesPanel::fully_observed(Array({3, 4}, 7.0));
  const Normalization norm = compute_normalization(p);
  CHECK(norm.mean == doctest::Approx(7.0));
  CHECK(norm.std == 1.0);
}

TEST_CASE("masked rows are exactly zero and windows align") {
  const std::size_t n = 6, T = 40;
  const SensorSet s = grid_sensors(n);
  const TimeSeriesPanel p = ramp_panel(n, T);
  const Normalization norm = compute_normalization(p);
  SamplingParams params;
  params.h = 4;
  params.u = 2;
  params.k = 2;
  params.n_m = 2;
  params.batch = 16;
  Rng rng(3);
  const TrainingBatch batch = generate_training_batch(p, s, params, norm, rng);
  REQUIRE(batch.samples.size() == 16);

  for (const auto& smp : batch.samples) {
    CHECK(smp.omega.size() == 2);
    CHECK(smp.x.dim(1) == params.h + params.u);
    CHECK(smp.target.dim(1) == params.h);

    // zeroing invariant: masked rows identically zero
    for (std::size_t idx : smp.omega) {
      for (std::size_t c = 0; c < params.h + params.u; ++c) {
        CHECK(smp.x.at(idx, c) == 0.0);
      }
    }
    // window alignment: target = raw last-h columns; x = normalized window
    const std::size_t j = smp.window_start;
    CHECK(j >= params.u);
    CHECK(j + params.h <= T);
    const std::set<std::size_t> omega_set(smp.omega.begin(), smp.omega.end());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < params.h; ++c) {
        CHECK(smp.target.at(i, c) == p.values.at(i, j + c));
        CHECK(smp.eval_mask[i * params.h + c] == 1);
      }
      if (!omega_set.count(i)) {
        for (std::size_t c = 0; c < params.h + params.u; ++c) {
          CHECK(smp.x.at(i, c) ==
                doctest::Approx(norm.apply(p.values.at(i, j - params.u + c))));
        }
      }
    }
    // masked graph: omega rows never send
    for (const auto& g : smp.a.graphs) {
      for (const auto& edges : g.receivers) {
        for (const auto& e : edges) CHECK(omega_set.count(e.sender) == 0);
      }
    }
  }
}

TEST_CASE("n_m = 0 reproduces the raw normalized window") {
  const std::size_t n = 5, T = 20;
  const SensorSet s = grid_sensors(n);
  const TimeSeriesPanel p = ramp_panel(n, T);
  const Normalization norm = compute_normalization(p);
  SamplingParams params;
  params.h = 3;
  params.u = 1;
  params.k = 2;
  params.n_m = 0;
  params.batch = 4;
  Rng rng(5);
  const TrainingBatch batch = generate_training_batch(p, s, params, norm, rng);
  for (const auto& smp : batch.samples) {
    CHECK(smp.omega.empty());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 4; ++c) {
        CHECK(smp.x.at(i, c) ==
              doctest::Approx(
                  norm.apply(p.values.at(i, smp.window_start - 1 + c))));
      }
    }
  }
}

TEST_CASE("p = h + u forces a single window") {
  const std::size_t n = 5;
  const SensorSet s = grid_sensors(n);
  SamplingParams params;
  params.h = 4;
  params.u = 2;
  params.k = 1;
  params.n_m = 1;
  params.batch = 8;
  const TimeSeriesPanel p = ramp_panel(n, params.h + params.u);
  const Normalization norm = compute_normalization(p);
  Rng rng(9);
  const TrainingBatch batch = generate_training_batch(p, s, params, norm, rng);
  for (const auto& smp : batch.samples) CHECK(smp.window_start == params.u);

  const TimeSeriesPanel too_short = ramp_panel(n, params.h + params.u - 1);
  Rng rng2(9);
  CHECK_THROWS_AS(
      generate_training_batch(too_short, s, params, compute_normalization(too_short), rng2),
      std::invalid_argument);
}

TEST_CASE("fixed seeds reproduce batches bit-for-bit") {
  const std::size_t n = 5;
  const SensorSet s = grid_sensors(n);
  const TimeSeriesPanel p = ramp_panel(n, 30);
  const Normalization norm = compute_normalization(p);
  SamplingParams params;
  params.h = 3;
  params.u = 2;
  params.k = 2;
  params.n_m = 2;
  params.batch = 4;

  Rng rng1(42), rng2(42);
  const TrainingBatch b1 = generate_training_batch(p, s, params, norm, rng1);
  const TrainingBatch b2 = generate_training_batch(p, s, params, norm, rng2);
  REQUIRE(b1.samples.size() == b2.samples.size());
  for (std::size_t i = 0; i < b1.samples.size(); ++i) {
    CHECK(same_sample(b1.samples[i], b2.samples[i]));
  }
}

TEST_CASE("every legal window start occurs over many draws") {
  const std::size_t n = 4;
  const SensorSet s = grid_sensors(n);
  SamplingParams params;
  params.h = 2;
  params.u = 1;
  params.k = 1;
  params.n_m = 1;
  params.batch = 200;
  const std::size_t T = 7;  // legal j in [1, 5]: 5 values
  const TimeSeriesPanel p = ramp_panel(n, T);
  Rng rng(17);
  const TrainingBatch batch =
      generate_training_batch(p, s, params, compute_normalization(p), rng);
  std::set<std::size_t> seen;
  for (const auto& smp : batch.samples) seen.insert(smp.window_start);
  CHECK(seen == std::set<std::size_t>{1, 2, 3, 4, 5});
}

TEST_CASE("n_m >= n is rejected") {
  const std::size_t n = 4;
  const SensorSet s = grid_sensors(n);
  const TimeSeriesPanel p = ramp_panel(n, 20);
  SamplingParams params;
  params.h = 2;
  params.u = 1;
  params.k = 1;
  params.n_m = 4;
  Rng rng(1);
  CHECK_THROWS_AS(
      generate_training_batch(p, s, params, compute_normalization(p), rng),
      std::invalid_argument);
}

TEST_CASE("unobserved cells join the mask set per column") {
  const std::size_t n = 4, T = 12;
  const SensorSet s = grid_sensors(n);
  TimeSeriesPanel p = ramp_panel(n, T);
  // Node 3 loses a single time step; the window containing it must use
  // per-column graphs and keep node 3 silent in that column only.
  for (std::size_t t = 0; t < T; ++t) p.set_observed(3, t, t != 5);

  SamplingParams params;
  params.h = 2;
  params.u = 1;
  params.k = 3;
  params.n_m = 0;
  params.batch = 64;
  Rng rng(23);
  const TrainingBatch batch =
      generate_training_batch(p, s, params, compute_normalization(p), rng);

  bool saw_varying = false;
  for (const auto& smp : batch.samples) {
    const std::size_t w0 = smp.window_start - params.u;
    const bool contains5 = w0 <= 5 && 5 < w0 + params.h + params.u;
    if (contains5) {
      saw_varying = true;
      REQUIRE(smp.a.per_column());
      const std::size_t col5 = 5 - w0;
      for (std::size_t c = 0; c < smp.a.graphs.size(); ++c) {
        bool node3_sends = false;
        for (const auto& edges : smp.a.graphs[c].receivers) {
          for (const auto& e : edges) node3_sends |= e.sender == 3;
        }
        CHECK(node3_sends == (c != col5));
      }
      CHECK(smp.x.at(3, col5) == 0.0);
      // eval mask excludes the unobserved target cell
      if (5 >= smp.window_start) {
        CHECK(smp.eval_mask[3 * params.h + (5 - smp.window_start)] == 0);
      }
    } else {
      CHECK(!smp.a.per_column());
    }
  }
  CHECK(saw_varying);
}
