#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "satcn/baselines.hpp"
#include "satcn/model.hpp"
#include "satcn/synthetic.hpp"

namespace satcn {

/// Declarative experiment description, loaded from a JSON file. Either a
/// dataset (panel + sensors CSV paths) or a synthetic block must be present
/// for commands that need data. CLI flags override file values.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = ".";

  std::string panel_path;    // dataset.panel
  std::string sensors_path;  // dataset.sensors
  std::optional<SyntheticFieldSpec> synthetic;

  ScenarioSpec scenario;
  ArchConfig arch;
  TrainConfig train;
  std::vector<std::size_t> knn_k = {1, 2, 3, 5, 8};

  bool has_dataset() const { return !panel_path.empty(); }
};

/// Parses the config file; validates referenced paths exist. Throws
/// ConfigError with a line/column diagnostic on malformed input.
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON dump of the config (sorted keys).
std::string config_to_json(const ExperimentConfig& cfg);

/// FNV-1a hash of the canonical dump, as fixed-width hex.
std::string config_hash(const ExperimentConfig& cfg);

/// "config_hash=<hex> seed=<n>" header stamped into output artifacts.
std::string artifact_stamp(const ExperimentConfig& cfg);

}  // namespace satcn
