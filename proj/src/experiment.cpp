#include "satcn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "satcn/autodiff.hpp"
#include "satcn/rng.hpp"

namespace satcn {

double ScenarioResult::best_knn_mae() const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [k, rep] : knn) best = std::min(best, rep.mae);
  return best;
}

GradcheckReport run_gradient_check(const ArchConfig& arch, std::uint64_t seed,
                                   double step, double tolerance,
                                   const std::vector<GradcheckInstance>& instances) {
  GradcheckReport report;
  report.tolerance = tolerance;
  Rng rng(seed);

  for (const GradcheckInstance& inst : instances) {
    if (inst.h == 0 || inst.n < 3) {
      throw std::invalid_argument("gradcheck: instance too small");
    }
    SatcnModel m = init_model(arch, rng);
    m.set_deg(0.5 + rng.uniform());
    m.norm.mean = rng.uniform(-1.0, 1.0);
    m.norm.std = 0.5 + rng.uniform();

    std::vector<std::array<double, 2>> coords(inst.n);
    for (auto& c : coords) c = {rng.uniform(), rng.uniform()};
    const SensorSet s = build_distance_matrix(coords, Metric::Euclidean);

    TrainingBatch batch;
    TrainingSample smp;
    smp.omega = rng.sample_without_replacement(inst.n, 1);
    smp.a.graphs.push_back(build_masked_adjacency(s, arch.k, smp.omega));
    smp.a_hat = build_full_adjacency(s, arch.k);
    const std::size_t T = inst.h + arch.u();
    smp.x = Array({inst.n, T});
    for (std::size_t i = 0; i < smp.x.size(); ++i) {
      smp.x[i] = rng.uniform(-1.5, 1.5);
    }
    for (std::size_t idx : smp.omega) {
      for (std::size_t t = 0; t < T; ++t) smp.x.at(idx, t) = 0.0;
    }
    smp.target = Array({inst.n, inst.h});
    for (std::size_t i = 0; i < smp.target.size(); ++i) {
      smp.target[i] = rng.uniform(-2.0, 2.0);
    }
    smp.eval_mask.assign(inst.n * inst.h, 1);
    batch.samples.push_back(std::move(smp));

    // Analytic gradients from the reverse-mode tape.
    std::vector<Array> grads;
    detail::batch_loss_and_gradients(m, batch, false, grads);

    // FD objective through the independent value-mode forward.
    const TrainingSample& sample = batch.samples[0];
    auto f = [&]() {
      const Array pred =
          detail::forward_block(sample.x, sample.a, sample.a_hat, m);
      return mae_loss(pred, sample.target, sample.eval_mask);
    };

    auto params = m.parameters();
    std::vector<const Array*> analytic;
    for (const auto& g : grads) analytic.push_back(&g);
    const ad::FiniteDiffReport fd =
        ad::finite_difference_check(f, params, analytic, step);
    if (fd.max_rel_error > report.max_rel_error) {
      report.max_rel_error = fd.max_rel_error;
      report.worst_tensor = fd.worst_tensor;
    }
    for (const auto& [name, arr] : params) {
      report.parameters_checked += arr->size();
    }
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

ScenarioResult run_scenario_experiment(const TimeSeriesPanel& panel,
                                       const SensorSet& sensors,
                                       const ScenarioSpec& scenario,
                                       const ArchConfig& arch,
                                       const TrainConfig& train_cfg,
                                       const std::vector<std::size_t>& knn_ks,
                                       const Array* truth) {
  const Scenario sc = make_scenario(panel, sensors, scenario);
  const std::size_t u = arch.u();
  const std::size_t T_test = sc.test_input.steps();
  if (T_test <= u) {
    throw std::invalid_argument("scenario: test period shorter than u + 1");
  }

  ScenarioResult result;
  const SatcnModel model = train(sc.train_panel, sc.train_sensor_set, arch,
                                 train_cfg, &result.history);

  // Kriging inputs live on the full sensor set with test sensors unknown.
  const Array est = krige(model, sc.test_input, sensors, sc.test_sensors);

  // Shared evaluation target over columns >= u of the test period.
  const std::size_t n_test = sc.test_sensors.size();
  const std::size_t cols = T_test - u;
  Array target({n_test, cols}, 0.0);
  std::vector<std::uint8_t> mask(n_test * cols, 0);
  for (std::size_t r = 0; r < n_test; ++r) {
    for (std::size_t t = 0; t < cols; ++t) {
      if (truth) {
        target.at(r, t) =
            truth->at(sc.test_sensors[r], sc.t_split + u + t);
        mask[r * cols + t] = 1;
      } else if (sc.test_truth.observed(r, u + t)) {
        target.at(r, t) = sc.test_truth.values.at(r, u + t);
        mask[r * cols + t] = 1;
      }
    }
  }

  result.satcn = evaluate(est, target, mask);
  result.eval_cells = result.satcn.count;

  const Array knn_full_target = target;  // same cells for every baseline
  for (std::size_t K : knn_ks) {
    const Array knn_est = knn_interpolate(sc.test_input, sensors,
                                          sc.test_sensors, K);
    Array knn_cropped({n_test, cols}, 0.0);
    for (std::size_t r = 0; r < n_test; ++r) {
      for (std::size_t t = 0; t < cols; ++t) {
        knn_cropped.at(r, t) = knn_est.at(r, u + t);
      }
    }
    result.knn.emplace_back(K, evaluate(knn_cropped, knn_full_target, mask));
  }
  return result;
}

}  // namespace satcn
