#include "satcn/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "satcn/errors.hpp"

namespace satcn {

namespace {

using nlohmann::json;

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_arch(const json& j, ArchConfig& a) {
  read_if(j, "k", a.k);
  read_if(j, "hidden", a.hidden);
  read_if(j, "tcn_widths", a.tcn_widths);
  read_if(j, "n_m", a.n_m);
  read_if(j, "h", a.h);
  read_if(j, "epsilon", a.epsilon);
  read_if(j, "loss_masked_only", a.loss_masked_only);
}

void parse_train(const json& j, TrainConfig& t) {
  read_if(j, "lr", t.lr);
  read_if(j, "beta1", t.beta1);
  read_if(j, "beta2", t.beta2);
  read_if(j, "adam_eps", t.adam_eps);
  read_if(j, "iterations", t.iterations);
  read_if(j, "batch", t.batch);
  read_if(j, "val_fraction", t.val_fraction);
  read_if(j, "patience", t.patience);
  read_if(j, "val_every", t.val_every);
  read_if(j, "val_window", t.val_window);
}

void parse_scenario(const json& j, ScenarioSpec& s) {
  read_if(j, "time_fraction", s.time_fraction);
  read_if(j, "sensor_fraction", s.sensor_fraction);
  read_if(j, "missing_ratio", s.missing_ratio);
  read_if(j, "seed", s.seed);
}

void parse_synthetic(const json& j, SyntheticFieldSpec& s) {
  read_if(j, "n", s.n);
  read_if(j, "steps", s.steps);
  read_if(j, "bases", s.bases);
  read_if(j, "length_scale", s.length_scale);
  read_if(j, "frequencies", s.frequencies);
  read_if(j, "noise_std", s.noise_std);
  read_if(j, "seed", s.seed);
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // Convert the parser's byte offset into a line/column diagnostic.
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min(e.byte, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << path << ":" << line << ":" << col << ": " << e.what();
    throw ConfigError(os.str());
  }

  ExperimentConfig cfg;
  try {
    read_if(j, "seed", cfg.seed);
    read_if(j, "output_dir", cfg.output_dir);
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      read_if(d, "panel", cfg.panel_path);
      read_if(d, "sensors", cfg.sensors_path);
    }
    if (j.contains("synthetic")) {
      SyntheticFieldSpec spec;
      parse_synthetic(j.at("synthetic"), spec);
      cfg.synthetic = spec;
    }
    if (j.contains("scenario")) parse_scenario(j.at("scenario"), cfg.scenario);
    if (j.contains("arch")) parse_arch(j.at("arch"), cfg.arch);
    if (j.contains("train")) parse_train(j.at("train"), cfg.train);
    read_if(j, "knn_k", cfg.knn_k);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }

  // Propagate the experiment seed into sub-seeds unless set explicitly.
  if (!j.contains("scenario") || !j.at("scenario").contains("seed")) {
    cfg.scenario.seed = cfg.seed;
  }
  if (cfg.synthetic && (!j.contains("synthetic") || !j.at("synthetic").contains("seed"))) {
    cfg.synthetic->seed = cfg.seed;
  }
  if (!j.contains("train") || !j.at("train").contains("seed")) {
    cfg.train.seed = cfg.seed;
  } else {
    cfg.train.seed = j.at("train").at("seed").get<std::uint64_t>();
  }

  if (cfg.has_dataset()) {
    if (!std::filesystem::exists(cfg.panel_path)) {
      throw ConfigError(path + ": dataset.panel does not exist: " + cfg.panel_path);
    }
    if (cfg.sensors_path.empty() || !std::filesystem::exists(cfg.sensors_path)) {
      throw ConfigError(path + ": dataset.sensors does not exist: " +
                        cfg.sensors_path);
    }
  }
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  if (cfg.has_dataset()) {
    j["dataset"] = json{{"panel", cfg.panel_path}, {"sensors", cfg.sensors_path}};
  }
  if (cfg.synthetic) {
    const SyntheticFieldSpec& s = *cfg.synthetic;
    j["synthetic"] = json{{"n", s.n},
                          {"steps", s.steps},
                          {"bases", s.bases},
                          {"length_scale", s.length_scale},
                          {"frequencies", s.frequencies},
                          {"noise_std", s.noise_std},
                          {"seed", s.seed}};
  }
  j["scenario"] = json{{"time_fraction", cfg.scenario.time_fraction},
                       {"sensor_fraction", cfg.scenario.sensor_fraction},
                       {"missing_ratio", cfg.scenario.missing_ratio},
                       {"seed", cfg.scenario.seed}};
  j["arch"] = json{{"k", cfg.arch.k},
                   {"hidden", cfg.arch.hidden},
                   {"tcn_widths", cfg.arch.tcn_widths},
                   {"n_m", cfg.arch.n_m},
                   {"h", cfg.arch.h},
                   {"epsilon", cfg.arch.epsilon},
                   {"loss_masked_only", cfg.arch.loss_masked_only}};
  j["train"] = json{{"lr", cfg.train.lr},
                    {"beta1", cfg.train.beta1},
                    {"beta2", cfg.train.beta2},
                    {"adam_eps", cfg.train.adam_eps},
                    {"iterations", cfg.train.iterations},
                    {"batch", cfg.train.batch},
                    {"seed", cfg.train.seed},
                    {"val_fraction", cfg.train.val_fraction},
                    {"patience", cfg.train.patience},
                    {"val_every", cfg.train.val_every},
                    {"val_window", cfg.train.val_window}};
  j["knn_k"] = cfg.knn_k;
  return j.dump();  // nlohmann objects keep sorted keys -> canonical
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string s = config_to_json(cfg);
  std::uint64_t hash = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char ch : s) {
    hash ^= ch;
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return std::string(buf);
}

std::string artifact_stamp(const ExperimentConfig& cfg) {
  return "config_hash=" + config_hash(cfg) + " seed=" + std::to_string(cfg.seed);
}

}  // namespace satcn
