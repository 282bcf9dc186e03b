#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "satcn/baselines.hpp"
#include "satcn/config.hpp"
#include "satcn/csv.hpp"
#include "satcn/errors.hpp"
#include "satcn/experiment.hpp"
#include "satcn/model.hpp"
#include "satcn/model_io.hpp"
#include "satcn/synthetic.hpp"

namespace fs = std::filesystem;
using namespace satcn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;      // usage / config error
constexpr int kExitNumerical = 2;  // numerical failure
constexpr int kExitData = 3;       // data error

struct DatasetBundle {
  SensorSet sensors;
  TimeSeriesPanel panel;
  std::vector<std::string> ids;
  std::vector<std::string> timestamps;
  std::optional<Array> truth;  // synthetic only
};

std::vector<std::string> default_timestamps(std::size_t T) {
  std::vector<std::string> out(T);
  for (std::size_t t = 0; t < T; ++t) out[t] = std::to_string(t);
  return out;
}

DatasetBundle resolve_dataset(const ExperimentConfig& cfg) {
  DatasetBundle b;
  if (cfg.has_dataset()) {
    b.sensors = read_sensor_csv(cfg.sensors_path);
    PanelCsv pc = read_panel_csv(cfg.panel_path);
    if (pc.ids != b.sensors.ids) {
      // Re-order panel columns to the sensor-set order.
      if (pc.ids.size() != b.sensors.size()) {
        throw DataError("panel and sensor set disagree on sensor count");
      }
      std::vector<std::size_t> perm(b.sensors.size());
      for (std::size_t i = 0; i < b.sensors.size(); ++i) {
        auto it = std::find(pc.ids.begin(), pc.ids.end(), b.sensors.ids[i]);
        if (it == pc.ids.end()) {
          throw DataError("panel is missing sensor id '" + b.sensors.ids[i] + "'");
        }
        perm[i] = static_cast<std::size_t>(it - pc.ids.begin());
      }
      const std::size_t n = b.sensors.size(), T = pc.panel.steps();
      TimeSeriesPanel reordered;
      reordered.values = Array({n, T}, 0.0);
      reordered.obs_mask.assign(n * T, 0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < T; ++t) {
          reordered.values.at(i, t) = pc.panel.values.at(perm[i], t);
          reordered.obs_mask[i * T + t] = pc.panel.obs_mask[perm[i] * T + t];
        }
      }
      pc.panel = std::move(reordered);
      pc.ids = b.sensors.ids;
    }
    b.panel = std::move(pc.panel);
    b.ids = std::move(pc.ids);
    b.timestamps = std::move(pc.timestamps);
    return b;
  }
  if (!cfg.synthetic) {
    throw ConfigError("config needs either a dataset or a synthetic block");
  }
  const SyntheticField field = generate_synthetic(*cfg.synthetic);
  b.sensors = field.sensors;
  b.panel = field.panel;
  b.ids = field.sensors.ids;
  b.timestamps = default_timestamps(field.panel.steps());
  b.truth = field.truth;
  return b;
}

void write_history_csv(const std::string& path, const TrainHistory& hist,
                       const std::string& stamp) {
  std::vector<std::vector<std::string>> rows;
  std::size_t vi = 0;
  for (std::size_t i = 0; i < hist.train_loss.size(); ++i) {
    std::string val;
    if (vi < hist.val_mae.size() && hist.val_mae[vi].first == i + 1) {
      val = format_double(hist.val_mae[vi].second);
      ++vi;
    }
    rows.push_back({std::to_string(i + 1), format_double(hist.train_loss[i]), val});
  }
  write_table_csv(path, {"iteration", "train_loss", "val_mae"}, rows, stamp);
}

int cmd_synth(const ExperimentConfig& cfg, double noise_rel) {
  if (!cfg.synthetic) {
    throw ConfigError("synth: no synthetic block in config and no flags given");
  }
  SyntheticFieldSpec spec = *cfg.synthetic;
  if (noise_rel > 0.0) {
    spec.noise_std = noise_rel * synthetic_signal_std(spec);
  }
  const SyntheticField field = generate_synthetic(spec);
  fs::create_directories(cfg.output_dir);
  const std::string stamp = artifact_stamp(cfg);
  const auto stamps = default_timestamps(spec.steps);

  write_panel_csv(cfg.output_dir + "/panel.csv", field.panel, field.sensors.ids,
                  stamps, stamp);
  write_sensor_coords_csv(cfg.output_dir + "/sensors.csv", field.sensors,
                          Metric::Euclidean, stamp);
  const TimeSeriesPanel truth_panel =
      TimeSeriesPanel::fully_observed(field.truth);
  write_panel_csv(cfg.output_dir + "/truth.csv", truth_panel, field.sensors.ids,
                  stamps, stamp);
  std::cout << "wrote " << cfg.output_dir << "/{panel,sensors,truth}.csv ("
            << spec.n << " sensors x " << spec.steps << " steps, noise_std="
            << spec.noise_std << ")\n";
  return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg) {
  const DatasetBundle data = resolve_dataset(cfg);
  fs::create_directories(cfg.output_dir);

  TrainHistory hist;
  const SatcnModel model =
      train(data.panel, data.sensors, cfg.arch, cfg.train, &hist);

  const std::string stamp = artifact_stamp(cfg);
  save_model(cfg.output_dir + "/model.satcn", model, config_hash(cfg), cfg.seed);
  write_history_csv(cfg.output_dir + "/history.csv", hist, stamp);

  std::cout << "trained " << hist.train_loss.size() << " iterations on "
            << data.panel.nodes() << " sensors; model -> " << cfg.output_dir
            << "/model.satcn\n";
  if (!hist.val_mae.empty()) {
    const auto best = std::min_element(
        hist.val_mae.begin(), hist.val_mae.end(),
        [](const auto& a, const auto& b) { return a.second < b.second; });
    std::cout << "best validation MAE " << best->second << " at iteration "
              << best->first << "\n";
  }
  return kExitOk;
}

int cmd_krige(const std::string& model_path, const std::string& sensors_path,
              const std::string& panel_path, const std::string& targets_arg,
              const std::string& out_path) {
  const ModelFile mf = load_model(model_path);
  const SensorSet all = read_sensor_csv(sensors_path);
  const PanelCsv obs_csv = read_panel_csv(panel_path);

  std::vector<std::string> target_ids;
  {
    std::stringstream ss(targets_arg);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) target_ids.push_back(item);
    }
  }

  const std::string stamp =
      "config_hash=" + mf.config_hash + " seed=" + std::to_string(mf.seed);

  if (target_ids.empty()) {
    write_table_csv(out_path, {"timestamp"}, {}, stamp);
    std::cout << "no targets; wrote empty estimate table to " << out_path << "\n";
    return kExitOk;
  }

  std::vector<std::size_t> unknown;
  for (const auto& id : target_ids) {
    auto it = std::find(all.ids.begin(), all.ids.end(), id);
    if (it == all.ids.end()) {
      throw DataError("target id '" + id + "' not in the sensor set");
    }
    unknown.push_back(static_cast<std::size_t>(it - all.ids.begin()));
  }
  std::sort(unknown.begin(), unknown.end());
  unknown.erase(std::unique(unknown.begin(), unknown.end()), unknown.end());
  if (unknown.size() != target_ids.size()) {
    throw DataError("duplicate target ids");
  }

  // The observation panel must cover exactly the non-target sensors.
  const std::set<std::size_t> unknown_set(unknown.begin(), unknown.end());
  std::vector<std::string> expected;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!unknown_set.count(i)) expected.push_back(all.ids[i]);
  }
  if (obs_csv.ids.size() != expected.size()) {
    throw DataError("observation panel must cover exactly the non-target sensors");
  }
  std::vector<std::size_t> perm(expected.size());
  for (std::size_t r = 0; r < expected.size(); ++r) {
    auto it = std::find(obs_csv.ids.begin(), obs_csv.ids.end(), expected[r]);
    if (it == obs_csv.ids.end()) {
      throw DataError("observation panel is missing sensor '" + expected[r] + "'");
    }
    perm[r] = static_cast<std::size_t>(it - obs_csv.ids.begin());
  }

  const std::size_t T = obs_csv.panel.steps();
  TimeSeriesPanel obs;
  obs.values = Array({expected.size(), T}, 0.0);
  obs.obs_mask.assign(expected.size() * T, 0);
  for (std::size_t r = 0; r < expected.size(); ++r) {
    for (std::size_t t = 0; t < T; ++t) {
      obs.values.at(r, t) = obs_csv.panel.values.at(perm[r], t);
      obs.obs_mask[r * T + t] = obs_csv.panel.obs_mask[perm[r] * T + t];
    }
  }

  const Array est = krige(mf.model, obs, all, unknown);

  std::vector<std::string> header{"timestamp"};
  for (std::size_t idx : unknown) header.push_back(all.ids[idx]);
  std::vector<std::vector<std::string>> rows;
  const std::size_t u = mf.model.arch.u();
  for (std::size_t t = 0; t < est.dim(1); ++t) {
    std::vector<std::string> row{obs_csv.timestamps[t + u]};
    for (std::size_t r = 0; r < unknown.size(); ++r) {
      row.push_back(format_double(est.at(r, t)));
    }
    rows.push_back(std::move(row));
  }
  write_table_csv(out_path, header, rows, stamp);
  std::cout << "wrote estimates for " << unknown.size() << " sensors x "
            << est.dim(1) << " steps to " << out_path << "\n";
  return kExitOk;
}

int cmd_evaluate(const ExperimentConfig& cfg) {
  const DatasetBundle data = resolve_dataset(cfg);
  fs::create_directories(cfg.output_dir);

  const ScenarioResult res = run_scenario_experiment(
      data.panel, data.sensors, cfg.scenario, cfg.arch, cfg.train, cfg.knn_k,
      data.truth ? &*data.truth : nullptr);

  const std::string stamp = artifact_stamp(cfg);
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"satcn", "", format_double(res.satcn.rmse),
                  format_double(res.satcn.mae), std::to_string(res.satcn.count)});
  for (const auto& [K, rep] : res.knn) {
    rows.push_back({"knn", std::to_string(K), format_double(rep.rmse),
                    format_double(rep.mae), std::to_string(rep.count)});
  }
  write_table_csv(cfg.output_dir + "/metrics.csv",
                  {"method", "K", "rmse", "mae", "count"}, rows, stamp);
  write_history_csv(cfg.output_dir + "/history.csv", res.history, stamp);

  std::cout << std::left << std::setw(10) << "method" << std::setw(6) << "K"
            << std::setw(14) << "RMSE" << std::setw(14) << "MAE" << "cells\n";
  std::cout << std::left << std::setw(10) << "satcn" << std::setw(6) << "-"
            << std::setw(14) << res.satcn.rmse << std::setw(14) << res.satcn.mae
            << res.satcn.count << "\n";
  for (const auto& [K, rep] : res.knn) {
    std::cout << std::left << std::setw(10) << "knn" << std::setw(6) << K
              << std::setw(14) << rep.rmse << std::setw(14) << rep.mae
              << rep.count << "\n";
  }
  std::cout << "metrics -> " << cfg.output_dir << "/metrics.csv\n";
  return kExitOk;
}

int cmd_gradcheck(const ExperimentConfig& cfg, double step, double tolerance) {
  const GradcheckReport rep =
      run_gradient_check(cfg.arch, cfg.seed, step, tolerance);
  std::cout << "checked " << rep.parameters_checked
            << " parameter coordinates; max relative error "
            << rep.max_rel_error << " (tolerance " << rep.tolerance << ")";
  if (!rep.worst_tensor.empty()) std::cout << ", worst: " << rep.worst_tensor;
  std::cout << "\n";
  if (!rep.pass) {
    std::cerr << "gradcheck FAILED\n";
    return kExitNumerical;
  }
  std::cout << "gradcheck passed\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SATCN spatiotemporal kriging engine"};
  app.require_subcommand(1);

  std::string config_path, out_dir, model_path, sensors_path, panel_path;
  std::string targets, out_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::size_t> iters_flag;
  double noise_rel = 0.0, step = 1e-5, tolerance = 1e-4;

  std::optional<std::size_t> synth_n, synth_steps, synth_bases;
  std::optional<double> synth_ls, synth_noise;

  auto* c_synth = app.add_subcommand("synth", "generate a synthetic dataset");
  c_synth->add_option("--config", config_path, "experiment config (json)");
  c_synth->add_option("--out", out_dir, "output directory");
  c_synth->add_option("--n", synth_n, "sensor count");
  c_synth->add_option("--steps", synth_steps, "time steps");
  c_synth->add_option("--bases", synth_bases, "spatial basis functions");
  c_synth->add_option("--length-scale", synth_ls, "spatial length scale");
  c_synth->add_option("--noise", synth_noise, "absolute noise std");
  c_synth->add_option("--noise-rel", noise_rel,
                      "noise std relative to the signal std");
  c_synth->add_option("--seed", seed_flag, "seed override");

  auto* c_train = app.add_subcommand("train", "train a SATCN model");
  c_train->add_option("--config", config_path, "experiment config (json)")
      ->required();
  c_train->add_option("--out", out_dir, "output directory override");
  c_train->add_option("--seed", seed_flag, "seed override");
  c_train->add_option("--iterations", iters_flag, "iteration override");

  auto* c_krige = app.add_subcommand("krige", "estimate unknown sensors");
  c_krige->add_option("--model", model_path, "model file")->required();
  c_krige->add_option("--sensors", sensors_path, "sensor csv covering all nodes")
      ->required();
  c_krige->add_option("--panel", panel_path, "observation panel csv")->required();
  c_krige->add_option("--targets", targets, "comma-separated unknown sensor ids");
  c_krige->add_option("--out", out_path, "estimate csv path")->required();

  auto* c_eval = app.add_subcommand("evaluate", "run a scenario end-to-end");
  c_eval->add_option("--config", config_path, "experiment config (json)")
      ->required();
  c_eval->add_option("--out", out_dir, "output directory override");
  c_eval->add_option("--seed", seed_flag, "seed override");
  c_eval->add_option("--iterations", iters_flag, "iteration override");

  auto* c_grad = app.add_subcommand("gradcheck", "finite-difference audit");
  c_grad->add_option("--config", config_path, "experiment config (json)");
  c_grad->add_option("--seed", seed_flag, "seed override");
  c_grad->add_option("--step", step, "central difference step");
  c_grad->add_option("--tolerance", tolerance, "max relative error allowed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (seed_flag) {
      cfg.seed = *seed_flag;
      cfg.train.seed = *seed_flag;
      cfg.scenario.seed = *seed_flag;
      if (cfg.synthetic) cfg.synthetic->seed = *seed_flag;
    }
    if (iters_flag) cfg.train.iterations = *iters_flag;
    if (!out_dir.empty()) cfg.output_dir = out_dir;

    if (app.got_subcommand(c_synth)) {
      if (!cfg.synthetic) {
        cfg.synthetic = SyntheticFieldSpec{};
        cfg.synthetic->seed = cfg.seed;
      }
      if (synth_n) cfg.synthetic->n = *synth_n;
      if (synth_steps) cfg.synthetic->steps = *synth_steps;
      if (synth_bases) cfg.synthetic->bases = *synth_bases;
      if (synth_ls) cfg.synthetic->length_scale = *synth_ls;
      if (synth_noise) cfg.synthetic->noise_std = *synth_noise;
      if (seed_flag) cfg.synthetic->seed = *seed_flag;
      return cmd_synth(cfg, noise_rel);
    }
    if (app.got_subcommand(c_train)) return cmd_train(cfg);
    if (app.got_subcommand(c_krige)) {
      return cmd_krige(model_path, sensors_path, panel_path, targets, out_path);
    }
    if (app.got_subcommand(c_eval)) return cmd_evaluate(cfg);
    if (app.got_subcommand(c_grad)) return cmd_gradcheck(cfg, step, tolerance);
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
