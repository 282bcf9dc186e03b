#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "satcn/autodiff.hpp"
#include "satcn/errors.hpp"
#include "satcn/model.hpp"
#include "satcn/model_io.hpp"
#include "satcn/rng.hpp"
#include "satcn/synthetic.hpp"

using namespace satcn;

namespace {

SensorSet random_sensors(Rng& rng, std::size_t n) {
  std::vector<std::array<double, 2>> coords(n);
  for (auto& c : coords) c = {rng.uniform(), rng.uniform()};
  return build_distance_matrix(coords, Metric::Euclidean);
}

ArchConfig small_arch(std::size_t width = 6, std::size_t h = 4) {
  ArchConfig arch;
  arch.hidden = {width, width};
  arch.tcn_widths = {2, 2};
  arch.k = 3;
  arch.h = h;
  return arch;
}

// Normalized random input with rows in omega zeroed.
Array random_input(Rng& rng, std::size_t n, std::size_t T,
                   const std::vector<std::size_t>& omega) {
  Array x({n, T});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.5, 1.5);
  for (std::size_t idx : omega) {
    for (std::size_t t = 0; t < T; ++t) x.at(idx, t) = 0.0;
  }
  return x;
}

}  // namespace

TEST_CASE("forward maps n x (h+u) to n x h") {
  Rng rng(5);
  ArchConfig arch = small_arch();
  SatcnModel m = init_model(arch, rng);
  m.set_deg(0.7);

  for (std::size_t n : {5ul, 23ul, 60ul}) {
    for (std::size_t h : {1ul, 6ul, 12ul}) {
      const SensorSet s = random_sensors(rng, n);
      GraphSeq a;
      a.graphs.push_back(build_masked_adjacency(s, arch.k, {0}));
      const NeighborGraph a_hat = build_full_adjacency(s, arch.k);
      const Array x = random_input(rng, n, h + arch.u(), {0});
      const Array y = satcn_forward(x, a, a_hat, m);
      CHECK(y.shape() == std::vector<std::size_t>{n, h});
    }
  }
}

TEST_CASE("input length must exceed u") {
  Rng rng(6);
  SatcnModel m = init_model(small_arch(), rng);
  const SensorSet s = random_sensors(rng, 5);
  GraphSeq a;
  a.graphs.push_back(build_full_adjacency(s, 3));
  const NeighborGraph a_hat = build_full_adjacency(s, 3);
  CHECK_THROWS_AS(satcn_forward(Array({5, 2}, 0.0), a, a_hat, m),
                  std::invalid_argument);
}

TEST_CASE("zero parameters give the denormalized bias path") {
  Rng rng(7);
  ArchConfig arch = small_arch();
  SatcnModel m = init_model(arch, rng);
  for (auto& [name, arr] : m.parameters()) arr->fill(0.0);
  m.set_deg(1.0);
  m.norm.mean = 13.0;
  m.norm.std = 2.0;

  const SensorSet s = random_sensors(rng, 6);
  GraphSeq a;
  a.graphs.push_back(build_full_adjacency(s, 3));
  const NeighborGraph a_hat = build_full_adjacency(s, 3);
  const Array y = satcn_forward(random_input(rng, 6, 7, {}), a, a_hat, m);
  for (std::size_t i = 0; i < y.size(); ++i) {
    CHECK(y[i] == doctest::Approx(13.0));
  }
}

TEST_CASE("forward is pure") {
  Rng rng(8);
  ArchConfig arch = small_arch();
  SatcnModel m = init_model(arch, rng);
  m.set_deg(0.9);
  const SensorSet s = random_sensors(rng, 7);
  GraphSeq a;
  a.graphs.push_back(build_masked_adjacency(s, 3, {2}));
  const NeighborGraph a_hat = build_full_adjacency(s, 3);
  const Array x = random_input(rng, 7, 8, {2});
  const Array y1 = satcn_forward(x, a, a_hat, m);
  const Array y2 = satcn_forward(x, a, a_hat, m);
  CHECK(y1.storage() == y2.storage());
}

TEST_CASE("chunked and monolithic forward agree exactly") {
  Rng rng(9);
  ArchConfig arch = small_arch(4, 4);
  SatcnModel m = init_model(arch, rng);
  m.set_deg(0.8);
  const std::size_t n = 8, T = 300;  // long enough to trigger chunking
  const SensorSet s = random_sensors(rng, n);
  GraphSeq a;
  a.graphs.push_back(build_masked_adjacency(s, 3, {1}));
  const NeighborGraph a_hat = build_full_adjacency(s, 3);
  const Array x = random_input(rng, n, T, {1});

  const Array chunked = satcn_forward(x, a, a_hat, m);
  const Array direct = detail::forward_block(x, a, a_hat, m);
  REQUIRE(chunked.shape() == direct.shape());
  for (std::size_t i = 0; i < chunked.size(); ++i) {
    CHECK(chunked[i] == direct[i]);
  }
}

TEST_CASE("tape forward agrees with value forward") {
  Rng rng(10);
  ArchConfig arch = small_arch(5, 3);
  SatcnModel m = init_model(arch, rng);
  m.set_deg(0.75);
  m.norm.mean = 2.0;
  m.norm.std = 1.5;
  const std::size_t n = 6, T = 5;
  const SensorSet s = random_sensors(rng, n);
  GraphSeq a;
  a.graphs.push_back(build_masked_adjacency(s, 3, {4}));
  const NeighborGraph a_hat = build_full_adjacency(s, 3);
  const Array x = random_input(rng, n, T, {4});

  const Array value_out = satcn_forward(x, a, a_hat, m);

  TrainingBatch batch;
  TrainingSample smp;
  smp.x = x;
  smp.target = Array({n, T - arch.u()}, 0.0);
  smp.a = a;
  smp.a_hat = a_hat;
  smp.eval_mask.assign(n * (T - arch.u()), 1);
  batch.samples.push_back(std::move(smp));

  std::vector<Array> grads;
  const double loss = detail::batch_loss_and_gradients(m, batch, false, grads);
  // loss = mean |value_out - 0|
  double expect = 0.0;
  for (std::size_t i = 0; i < value_out.size(); ++i) {
    expect += std::abs(value_out[i]);
  }
  expect /= static_cast<double>(value_out.size());
  CHECK(loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("masking invariance: masked inputs cannot influence any output") {
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 4 + rng.uniform_index(17);  // n <= 20
    ArchConfig arch = small_arch(4, 3);
    SatcnModel m = init_model(arch, rng);
    m.set_deg(0.6);
    const SensorSet s = random_sensors(rng, n);
    const std::size_t n_mask = 1 + rng.uniform_index(n - 1);
    const auto omega = rng.sample_without_replacement(n, n_mask);

    GraphSeq a;
    a.graphs.push_back(build_masked_adjacency(s, arch.k, omega));
    const NeighborGraph a_hat = build_full_adjacency(s, arch.k);

    const std::size_t T = arch.h + arch.u();
    Array x = random_input(rng, n, T, omega);
    const Array y = satcn_forward(x, a, a_hat, m);

    Array x2 = x;
    for (std::size_t idx : omega) {
      for (std::size_t t = 0; t < T; ++t) {
        x2.at(idx, t) = rng.uniform(-999.0, 999.0);
      }
    }
    const Array y2 = satcn_forward(x2, a, a_hat, m);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == y2[i]);
  }
}

TEST_CASE("mae_loss hand values") {
  Array pred({1, 3}, 0.0);
  Array target({1, 3}, 0.0);
  pred[0] = 1.0;
  pred[1] = -1.0;
  pred[2] = 3.0;
  CHECK(mae_loss(pred, target, {1, 1, 1}) == doctest::Approx(5.0 / 3.0));
  CHECK(mae_loss(pred, pred, {1, 1, 1}) == 0.0);
  Array p2({1, 3}, 0.0);
  p2[1] = 2.0;
  CHECK(mae_loss(p2, target, {0, 1, 0}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(mae_loss(pred, target, {0, 0, 0}), std::invalid_argument);
}

TEST_CASE("full-model gradients match finite differences") {
  Rng rng(12);
  ArchConfig arch = small_arch(3, 3);  // tiny widths keep the sweep fast
  SatcnModel m = init_model(arch, rng);
  m.set_deg(0.85);
  m.norm.mean = 0.3;
  m.norm.std = 1.2;

  const std::size_t n = 5;
  const SensorSet s = random_sensors(rng, n);
  const std::size_t T = arch.h + arch.u();

  TrainingBatch batch;
  for (int i = 0; i < 2; ++i) {
    TrainingSample smp;
    const auto omega = rng.sample_without_replacement(n, 1);
    smp.omega = omega;
    smp.a.graphs.push_back(build_masked_adjacency(s, arch.k, omega));
    smp.a_hat = build_full_adjacency(s, arch.k);
    smp.x = random_input(rng, n, T, omega);
    smp.target = Array({n, arch.h});
    for (std::size_t q = 0; q < smp.target.size(); ++q) {
      smp.target[q] = rng.uniform(-2.0, 2.0);
    }
    smp.eval_mask.assign(n * arch.h, 1);
    batch.samples.push_back(std::move(smp));
  }

  std::vector<Array> grads;
  detail::batch_loss_and_gradients(m, batch, false, grads);

  auto params = m.parameters();
  std::vector<const Array*> analytic;
  for (const auto& g : grads) analytic.push_back(&g);

  auto f = [&]() {
    std::vector<Array> scratch;
    return detail::batch_loss_and_gradients(m, batch, false, scratch);
  };
  const auto report = ad::finite_difference_check(f, params, analytic, 1e-5);
  CAPTURE(report.worst_tensor);
  CAPTURE(report.analytic);
  CAPTURE(report.numeric);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("training on a constant panel reaches tiny validation error") {
  const std::size_t n = 10, T = 60;
  Rng rng(13);
  const SensorSet s = random_sensors(rng, n);
  const TimeSeriesPanel panel =
      TimeSeriesPanel::fully_observed(Array({n, T}, 5.0));

  ArchConfig arch = small_arch(4, 3);
  TrainConfig cfg;
  cfg.iterations = 500;
  cfg.batch = 4;
  cfg.seed = 3;
  cfg.val_every = 50;
  cfg.val_window = 30;

  TrainHistory hist;
  const SatcnModel m = train(panel, s, arch, cfg, &hist);
  REQUIRE(!hist.val_mae.empty());
  double best = hist.val_mae.front().second;
  for (const auto& [iter, v] : hist.val_mae) best = std::min(best, v);
  CHECK(best < 1e-2);
}

TEST_CASE("seed-fixed training is deterministic") {
  const std::size_t n = 8, T = 50;
  SyntheticFieldSpec spec;
  spec.n = n;
  spec.steps = T;
  spec.bases = 2;
  spec.noise_std = 0.05;
  spec.seed = 21;
  const SyntheticField field = generate_synthetic(spec);

  ArchConfig arch = small_arch(4, 3);
  TrainConfig cfg;
  cfg.iterations = 30;
  cfg.batch = 4;
  cfg.seed = 99;
  cfg.val_fraction = 0.2;
  cfg.val_every = 10;

  TrainHistory h1, h2;
  const SatcnModel m1 = train(field.panel, field.sensors, arch, cfg, &h1);
  const SatcnModel m2 = train(field.panel, field.sensors, arch, cfg, &h2);
  CHECK(h1.train_loss == h2.train_loss);
  CHECK(h1.val_mae == h2.val_mae);

  const auto p1 = m1.parameters();
  const auto p2 = m2.parameters();
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].second->storage() == p2[i].second->storage());
  }
}

TEST_CASE("I_max = 0 returns the initialization with empty history") {
  const std::size_t n = 6, T = 30;
  Rng rng(14);
  const SensorSet s = random_sensors(rng, n);
  const TimeSeriesPanel panel =
      TimeSeriesPanel::fully_observed(Array({n, T}, 1.0));
  ArchConfig arch = small_arch(4, 3);
  TrainConfig cfg;
  cfg.iterations = 0;
  cfg.seed = 5;

  TrainHistory hist;
  const SatcnModel m = train(panel, s, arch, cfg, &hist);
  CHECK(hist.train_loss.empty());
  CHECK(hist.val_mae.empty());

  // n_val = floor(0.1*6) = 0, so no split draw precedes initialization
  Rng rng3(cfg.seed);
  const SatcnModel fresh = init_model(arch, rng3);
  const auto pm = m.parameters();
  const auto pf = fresh.parameters();
  for (std::size_t i = 0; i < pm.size(); ++i) {
    CHECK(pm[i].second->storage() == pf[i].second->storage());
  }
}

TEST_CASE("krige handles empty requests and rejects overlap") {
  Rng rng(15);
  ArchConfig arch = small_arch(4, 3);
  SatcnModel m = init_model(arch, rng);
  m.set_deg(0.5);
  const SensorSet s = random_sensors(rng, 6);
  TimeSeriesPanel obs = TimeSeriesPanel::fully_observed(Array({6, 10}, 1.0));

  const Array empty = krige(m, obs, s, {});
  CHECK(empty.shape() == std::vector<std::size_t>{0, 8});

  // observed rows must cover exactly the complement
  TimeSeriesPanel wrong = TimeSeriesPanel::fully_observed(Array({6, 10}, 1.0));
  CHECK_THROWS_AS(krige(m, wrong, s, {1, 3}), std::invalid_argument);
  CHECK_THROWS_AS(krige(m, obs, s, {1, 1, 2}), std::invalid_argument);
}

TEST_CASE("krige is invariant to the unknown-row fill inputs") {
  Rng rng(16);
  ArchConfig arch = small_arch(4, 3);
  SatcnModel m = init_model(arch, rng);
  m.set_deg(0.8);
  m.norm.mean = 1.0;
  m.norm.std = 2.0;

  const std::size_t n = 12, T = 9;
  const SensorSet s = random_sensors(rng, n);
  const std::vector<std::size_t> unknown = {2, 7};

  TimeSeriesPanel obs;
  obs.values = Array({n - 2, T});
  obs.obs_mask.assign((n - 2) * T, 1);
  for (std::size_t i = 0; i < obs.values.size(); ++i) {
    obs.values[i] = rng.uniform(-3.0, 3.0);
  }
  const Array est = krige(m, obs, s, unknown);
  CHECK(est.shape() == std::vector<std::size_t>{2, T - 2});

  // the same request built through satcn_forward with junk at unknown rows
  GraphSeq a;
  a.graphs.push_back(build_masked_adjacency(s, arch.k, unknown));
  const NeighborGraph a_hat = build_full_adjacency(s, arch.k);
  Array x({n, T}, 0.0);
  std::size_t r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 2 || i == 7) continue;
    for (std::size_t t = 0; t < T; ++t) {
      x.at(i, t) = m.norm.apply(obs.values.at(r, t));
    }
    ++r;
  }
  Array xj = x;
  for (std::size_t t = 0; t < T; ++t) {
    xj.at(2, t) = 999.0;
    xj.at(7, t) = -999.0;
  }
  const Array y0 = satcn_forward(x, a, a_hat, m);
  const Array yj = satcn_forward(xj, a, a_hat, m);
  for (std::size_t i = 0; i < y0.size(); ++i) CHECK(y0[i] == yj[i]);
  CHECK(est.at(0, 0) == y0.at(2, 0));
  CHECK(est.at(1, 0) == y0.at(7, 0));
}

TEST_CASE("a model trained at one size krige-runs at a larger one") {
  SyntheticFieldSpec spec;
  spec.n = 40;
  spec.steps = 60;
  spec.bases = 3;
  spec.noise_std = 0.02;
  spec.seed = 31;
  const SyntheticField field = generate_synthetic(spec);

  ArchConfig arch = small_arch(4, 3);
  TrainConfig cfg;
  cfg.iterations = 10;
  cfg.batch = 4;
  cfg.seed = 77;
  const SatcnModel m = train(field.panel, field.sensors, arch, cfg, nullptr);

  SyntheticFieldSpec spec2 = spec;
  spec2.n = 60;
  spec2.seed = 32;
  const SyntheticField larger = generate_synthetic(spec2);
  std::vector<std::size_t> unknown = {5, 17, 44};
  TimeSeriesPanel obs;
  const std::size_t T = 12;
  obs.values = Array({60 - unknown.size(), T});
  obs.obs_mask.assign(obs.values.size(), 1);
  std::size_t r = 0;
  for (std::size_t i = 0; i < 60; ++i) {
    if (i == 5 || i == 17 || i == 44) continue;
    for (std::size_t t = 0; t < T; ++t) {
      obs.values.at(r, t) = larger.panel.values.at(i, t);
    }
    ++r;
  }
  const Array est = krige(m, obs, larger.sensors, unknown);
  CHECK(est.shape() == std::vector<std::size_t>{3, T - 2});
  for (std::size_t i = 0; i < est.size(); ++i) CHECK(std::isfinite(est[i]));
}

TEST_CASE("model files round-trip byte-for-byte") {
  Rng rng(17);
  ArchConfig arch = small_arch(5, 4);
  SatcnModel m = init_model(arch, rng);
  m.set_deg(0.345);
  m.norm.mean = -2.5;
  m.norm.std = 0.75;

  const std::string p1 = "test_model_a.bin", p2 = "test_model_b.bin";
  save_model(p1, m, "deadbeef00000000", 42);

  const ModelFile loaded = load_model(p1);
  CHECK(loaded.seed == 42);
  CHECK(loaded.config_hash == "deadbeef00000000");
  CHECK(loaded.model.deg == m.deg);
  CHECK(loaded.model.norm.mean == m.norm.mean);
  CHECK(loaded.model.norm.std == m.norm.std);
  const auto pa = m.parameters();
  const auto pb = loaded.model.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].second->storage() == pb[i].second->storage());
  }

  save_model(p2, loaded.model, loaded.config_hash, loaded.seed);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)),
                       std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)),
                       std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK(b1.substr(0, 8) == "SATCNMDL");
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("corrupt model files are rejected") {
  const std::string path = "test_model_bad.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTAMODELFILE____";
  }
  CHECK_THROWS_AS(load_model(path), DataError);
  std::remove(path.c_str());
}
