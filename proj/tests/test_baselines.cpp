#include <doctest.h>

#include <cmath>
#include <set>

#include "satcn/baselines.hpp"
#include "satcn/rng.hpp"

using namespace satcn;

namespace {

SensorSet line_sensors(std::size_t n) {
  std::vector<std::array<double, 2>> coords(n);
  for (std::size_t i = 0; i < n; ++i) {
    coords[i] = {static_cast<double>(i), 0.0};
  }
  return build_distance_matrix(coords, Metric::Euclidean);
}

}  // namespace

TEST_CASE("knn on a constant field returns the constant") {
  const SensorSet s = line_sensors(5);
  TimeSeriesPanel obs = TimeSeriesPanel::fully_observed(Array({4, 6}, 7.0));
  const Array est = knn_interpolate(obs, s, {2}, 3);
  REQUIRE(est.shape() == std::vector<std::size_t>{1, 6});
  for (std::size_t i = 0; i < est.size(); ++i) CHECK(est[i] == doctest::Approx(7.0));
}

TEST_CASE("knn with K=1 returns the nearest observed value") {
  const SensorSet s = line_sensors(4);
  // unknown node 1; observed rows map to sensors {0, 2, 3}
  Array v({3, 2}, 0.0);
  v.at(0, 0) = 10.0;  // sensor 0
  v.at(1, 0) = 20.0;  // sensor 2
  v.at(2, 0) = 30.0;  // sensor 3
  v.at(0, 1) = 1.0;
  v.at(1, 1) = 2.0;
  v.at(2, 1) = 3.0;
  TimeSeriesPanel obs = TimeSeriesPanel::fully_observed(std::move(v));
  const Array est = knn_interpolate(obs, s, {1}, 1);
  // sensors 0 and 2 tie at distance 1; lower index wins
  CHECK(est.at(0, 0) == doctest::Approx(10.0));
  CHECK(est.at(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("knn hand mean of the two nearest") {
  const SensorSet s = line_sensors(4);
  Array v({3, 1}, 0.0);
  v.at(0, 0) = 2.0;   // sensor 1, distance 1 from node 0
  v.at(1, 0) = 4.0;   // sensor 2, distance 2
  v.at(2, 0) = 10.0;  // sensor 3, distance 3
  TimeSeriesPanel obs = TimeSeriesPanel::fully_observed(std::move(v));
  const Array est = knn_interpolate(obs, s, {0}, 2);
  CHECK(est.at(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("knn skips unavailable sensors per time step") {
  const SensorSet s = line_sensors(4);
  Array v({3, 2}, 0.0);
  v.at(0, 0) = 2.0;
  v.at(1, 0) = 4.0;
  v.at(2, 0) = 10.0;
  v.at(0, 1) = 2.0;
  v.at(1, 1) = 4.0;
  v.at(2, 1) = 10.0;
  TimeSeriesPanel obs = TimeSeriesPanel::fully_observed(std::move(v));
  obs.set_observed(0, 1, false);  // nearest sensor missing at t=1
  const Array est = knn_interpolate(obs, s, {0}, 2);
  CHECK(est.at(0, 0) == doctest::Approx(3.0));
  CHECK(est.at(0, 1) == doctest::Approx(7.0));  // falls back to sensors 2,3
}

TEST_CASE("knn fails when nothing is observed at a step") {
  const SensorSet s = line_sensors(3);
  TimeSeriesPanel obs = TimeSeriesPanel::fully_observed(Array({2, 2}, 1.0));
  obs.set_observed(0, 1, false);
  obs.set_observed(1, 1, false);
  CHECK_THROWS_AS(knn_interpolate(obs, s, {2}, 1), std::invalid_argument);
}

TEST_CASE("knn recovers the midpoint of a linear field") {
  // Sensors at x = 0,1,2,3,4; field f(x) = 3x + 1; unknown node 2 sits
  // midway between its two nearest observed neighbors 1 and 3.
  const SensorSet s = line_sensors(5);
  Array v({4, 1}, 0.0);
  v.at(0, 0) = 1.0;   // x=0
  v.at(1, 0) = 4.0;   // x=1
  v.at(2, 0) = 10.0;  // x=3
  v.at(3, 0) = 13.0;  // x=4
  TimeSeriesPanel obs = TimeSeriesPanel::fully_observed(std::move(v));
  const Array est = knn_interpolate(obs, s, {2}, 2);
  CHECK(est.at(0, 0) == doctest::Approx(7.0));  // exact midpoint value
}

TEST_CASE("metric hand values") {
  Array pred({1, 2}, 0.0);
  Array truth({1, 2}, 0.0);
  pred[0] = 3.0;
  pred[1] = -4.0;
  const MetricReport rep = evaluate(pred, truth, {1, 1});
  CHECK(rep.mae == doctest::Approx(3.5).epsilon(1e-13));
  CHECK(rep.rmse == doctest::Approx(std::sqrt(12.5)).epsilon(1e-13));
  CHECK(rep.count == 2);

  const MetricReport zero = evaluate(truth, truth, {1, 1});
  CHECK(zero.mae == 0.0);
  CHECK(zero.rmse == 0.0);

  Array single({1, 1}, 2.0);
  const MetricReport one = evaluate(single, Array({1, 1}, 0.0), {1});
  CHECK(one.mae == doctest::Approx(2.0));
  CHECK(one.rmse == doctest::Approx(2.0));

  CHECK_THROWS_AS(evaluate(pred, truth, {0, 0}), std::invalid_argument);
}

TEST_CASE("metrics agree with a naive recomputation on random data") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 1 + rng.uniform_index(6);
    const std::size_t T = 1 + rng.uniform_index(9);
    Array pred({n, T}), truth({n, T});
    std::vector<std::uint8_t> mask(n * T, 0);
    bool any = false;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = rng.uniform(-5, 5);
      truth[i] = rng.uniform(-5, 5);
      mask[i] = rng.uniform() < 0.7 ? 1 : 0;
      any |= mask[i] != 0;
    }
    if (!any) mask[0] = 1;

    const MetricReport r = evaluate(pred, truth, mask);
    double sq = 0, ab = 0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (!mask[i]) continue;
      sq += (pred[i] - truth[i]) * (pred[i] - truth[i]);
      ab += std::abs(pred[i] - truth[i]);
      ++cnt;
    }
    CHECK(std::abs(r.mae - ab / cnt) <= 1e-12);
    CHECK(std::abs(r.rmse - std::sqrt(sq / cnt)) <= 1e-12);
  }
}

TEST_CASE("scenario 7T8S on 10 sensors x 100 steps") {
  const SensorSet s = line_sensors(10);
  TimeSeriesPanel panel = TimeSeriesPanel::fully_observed(Array({10, 100}, 1.0));
  ScenarioSpec spec;
  spec.seed = 9;
  const Scenario sc = make_scenario(panel, s, spec);

  CHECK(sc.train_sensors.size() == 8);
  CHECK(sc.test_sensors.size() == 2);
  CHECK(sc.t_split == 70);
  CHECK(sc.train_panel.nodes() == 8);
  CHECK(sc.train_panel.steps() == 70);
  CHECK(sc.test_input.nodes() == 8);
  CHECK(sc.test_input.steps() == 30);
  CHECK(sc.test_truth.nodes() == 2);
  CHECK(sc.test_truth.steps() == 30);
  CHECK(sc.train_sensor_set.size() == 8);

  // ratio 0 -> empty injected mask
  for (std::uint8_t m : sc.injected_mask) CHECK(m == 0);

  // train/test sensor sets partition the full set
  std::set<std::size_t> all(sc.train_sensors.begin(), sc.train_sensors.end());
  all.insert(sc.test_sensors.begin(), sc.test_sensors.end());
  CHECK(all.size() == 10);
}

TEST_CASE("scenario injection drops the requested share of observed cells") {
  const SensorSet s = line_sensors(10);
  TimeSeriesPanel panel = TimeSeriesPanel::fully_observed(Array({10, 100}, 1.0));
  ScenarioSpec spec;
  spec.missing_ratio = 0.3;
  spec.seed = 4;
  const Scenario sc = make_scenario(panel, s, spec);

  std::size_t injected = 0, remaining = 0;
  for (std::size_t i = 0; i < sc.injected_mask.size(); ++i) {
    injected += sc.injected_mask[i];
    remaining += sc.train_panel.obs_mask[i];
  }
  CHECK(injected == static_cast<std::size_t>(0.3 * 8 * 70));
  CHECK(remaining == 8 * 70 - injected);
}

TEST_CASE("scenario splits are seed-deterministic") {
  const SensorSet s = line_sensors(10);
  TimeSeriesPanel panel = TimeSeriesPanel::fully_observed(Array({10, 50}, 2.0));
  ScenarioSpec spec;
  spec.missing_ratio = 0.2;
  spec.seed = 1234;
  const Scenario a = make_scenario(panel, s, spec);
  const Scenario b = make_scenario(panel, s, spec);
  CHECK(a.train_sensors == b.train_sensors);
  CHECK(a.test_sensors == b.test_sensors);
  CHECK(a.injected_mask == b.injected_mask);
  CHECK(a.train_panel.obs_mask == b.train_panel.obs_mask);
}

TEST_CASE("scenario rejects degenerate splits") {
  const SensorSet s = line_sensors(3);
  TimeSeriesPanel panel = TimeSeriesPanel::fully_observed(Array({3, 10}, 0.0));
  ScenarioSpec spec;
  spec.sensor_fraction = 0.4;  // floor(1.2) = 1 training sensor
  CHECK_THROWS_AS(make_scenario(panel, s, spec), std::invalid_argument);
  spec.sensor_fraction = 1.0;
  CHECK_THROWS_AS(make_scenario(panel, s, spec), std::invalid_argument);
}
