#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "satcn/config.hpp"
#include "satcn/csv.hpp"
#include "satcn/errors.hpp"
#include "satcn/synthetic.hpp"

using namespace satcn;

TEST_CASE("synthetic generation is deterministic and keeps the truth") {
  SyntheticFieldSpec spec;
  spec.n = 12;
  spec.steps = 40;
  spec.bases = 3;
  spec.noise_std = 0.2;
  spec.seed = 8;

  const SyntheticField a = generate_synthetic(spec);
  const SyntheticField b = generate_synthetic(spec);
  CHECK(a.panel.values.storage() == b.panel.values.storage());
  CHECK(a.truth.storage() == b.truth.storage());
  CHECK(a.sensors.dist.storage() == b.sensors.dist.storage());

  // noise is applied on top of the retained truth
  bool differs = false;
  for (std::size_t i = 0; i < a.truth.size(); ++i) {
    differs |= a.panel.values[i] != a.truth[i];
  }
  CHECK(differs);
}

TEST_CASE("one basis function gives a rank-1 field") {
  SyntheticFieldSpec spec;
  spec.n = 8;
  spec.steps = 30;
  spec.bases = 1;
  spec.noise_std = 0.0;
  spec.seed = 3;
  const SyntheticField f = generate_synthetic(spec);

  // truth[i][t] = phi_i * psi_t: all 2x2 minors vanish
  const Array& v = f.truth;
  for (std::size_t i = 1; i < spec.n; ++i) {
    for (std::size_t t = 1; t < spec.steps; ++t) {
      const double det =
          v.at(0, 0) * v.at(i, t) - v.at(0, t) * v.at(i, 0);
      CHECK(std::abs(det) < 1e-9);
    }
  }
}

TEST_CASE("huge length scale flattens the field spatially") {
  SyntheticFieldSpec spec;
  spec.n = 10;
  spec.steps = 20;
  spec.bases = 4;
  spec.length_scale = 1e6;
  spec.noise_std = 0.0;
  spec.seed = 5;
  const SyntheticField f = generate_synthetic(spec);
  for (std::size_t t = 0; t < spec.steps; ++t) {
    double lo = f.truth.at(0, t), hi = lo;
    for (std::size_t i = 1; i < spec.n; ++i) {
      lo = std::min(lo, f.truth.at(i, t));
      hi = std::max(hi, f.truth.at(i, t));
    }
    CHECK(hi - lo < 1e-6);
  }
}

TEST_CASE("degenerate synthetic specs are rejected") {
  SyntheticFieldSpec spec;
  spec.n = 3;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  spec.n = 10;
  spec.length_scale = 0.0;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  spec.length_scale = 1.0;
  spec.noise_std = -1.0;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
}

TEST_CASE("panel csv round-trips values and mask") {
  SyntheticFieldSpec spec;
  spec.n = 6;
  spec.steps = 15;
  spec.bases = 2;
  spec.noise_std = 0.1;
  spec.seed = 11;
  SyntheticField f = generate_synthetic(spec);
  f.panel.set_observed(2, 3, false);
  f.panel.set_observed(5, 14, false);

  std::vector<std::string> ids = f.sensors.ids;
  std::vector<std::string> stamps(spec.steps);
  for (std::size_t t = 0; t < spec.steps; ++t) stamps[t] = "t" + std::to_string(t);

  const std::string path = "test_panel_roundtrip.csv";
  write_panel_csv(path, f.panel, ids, stamps, "config_hash=abc seed=11");

  const PanelCsv rt = read_panel_csv(path);
  CHECK(rt.ids == ids);
  CHECK(rt.timestamps == stamps);
  REQUIRE(rt.panel.nodes() == spec.n);
  REQUIRE(rt.panel.steps() == spec.steps);
  CHECK(rt.panel.obs_mask == f.panel.obs_mask);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (std::size_t t = 0; t < spec.steps; ++t) {
      if (!f.panel.observed(i, t)) continue;
      CHECK(rt.panel.values.at(i, t) == f.panel.values.at(i, t));
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("panel csv reports malformed cells with position") {
  const std::string path = "test_panel_bad.csv";
  {
    std::ofstream out(path);
    out << "timestamp,a,b\n";
    out << "0,1.5,2.5\n";
    out << "1,xyz,2.5\n";
  }
  try {
    read_panel_csv(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":3:2:") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("config loads with defaults and overrides") {
  const std::string path = "test_config.json";
  {
    std::ofstream out(path);
    out << R"({
      "seed": 7,
      "output_dir": "out",
      "synthetic": {"n": 20, "steps": 100, "bases": 3},
      "arch": {"k": 4, "hidden": [8, 8], "h": 5},
      "train": {"iterations": 12, "batch": 2},
      "knn_k": [1, 3]
    })";
  }
  const ExperimentConfig cfg = load_config(path);
  CHECK(cfg.seed == 7);
  CHECK(cfg.output_dir == "out");
  REQUIRE(cfg.synthetic.has_value());
  CHECK(cfg.synthetic->n == 20);
  CHECK(cfg.synthetic->seed == 7);  // inherited from the experiment seed
  CHECK(cfg.arch.k == 4);
  CHECK(cfg.arch.h == 5);
  CHECK(cfg.arch.hidden == std::vector<std::size_t>{8, 8});
  CHECK(cfg.train.iterations == 12);
  CHECK(cfg.train.seed == 7);
  CHECK(cfg.scenario.seed == 7);
  CHECK(cfg.knn_k == std::vector<std::size_t>{1, 3});
  std::remove(path.c_str());
}

TEST_CASE("config hash is stable and sensitive") {
  ExperimentConfig a;
  a.seed = 1;
  ExperimentConfig b = a;
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("malformed config carries a line/column diagnostic") {
  const std::string path = "test_config_bad.json";
  {
    std::ofstream out(path);
    out << "{\n  \"seed\": 7,\n  \"oops\n}\n";
  }
  try {
    load_config(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    // the unterminated string is detected at the following line break
    CHECK(std::string(e.what()).find(":4:1:") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("missing dataset paths are config errors") {
  const std::string path = "test_config_missing.json";
  {
    std::ofstream out(path);
    out << R"({"dataset": {"panel": "no_such_panel.csv", "sensors": "n.csv"}})";
  }
  CHECK_THROWS_AS(load_config(path), ConfigError);
  std::remove(path.c_str());
}
