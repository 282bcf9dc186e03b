#include "satcn/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace satcn {

TimeSeriesPanel TimeSeriesPanel::fully_observed(Array values, std::string freq) {
  if (values.rank() != 2) {
    throw std::invalid_argument("panel: values must be rank 2");
  }
  TimeSeriesPanel p;
  p.obs_mask.assign(values.size(), 1);
  p.values = std::move(values);
  p.freq_label = std::move(freq);
  return p;
}

Normalization compute_normalization(const TimeSeriesPanel& panel) {
  double sum = 0.0;
  std::size_t cnt = 0;
  const std::size_t n = panel.nodes(), T = panel.steps();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      if (panel.observed(i, t)) {
        sum += panel.values.at(i, t);
        ++cnt;
      }
    }
  }
  Normalization norm;
  if (cnt == 0) return norm;
  norm.mean = sum / static_cast<double>(cnt);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      if (panel.observed(i, t)) {
        const double d = panel.values.at(i, t) - norm.mean;
        ss += d * d;
      }
    }
  }
  const double var = ss / static_cast<double>(cnt);
  norm.std = var > 1e-24 ? std::sqrt(var) : 1.0;
  return norm;
}

namespace {

// Per-column sender availability inside a window: observed and not simulated
// unknown. Returns one flag vector per window column.
std::vector<std::vector<std::uint8_t>> window_availability(
    const TimeSeriesPanel& panel, std::size_t win_start, std::size_t win_len,
    const std::vector<std::size_t>& omega) {
  const std::size_t n = panel.nodes();
  std::vector<std::vector<std::uint8_t>> avail(win_len,
                                               std::vector<std::uint8_t>(n, 1));
  for (std::size_t idx : omega) {
    for (auto& col : avail) col[idx] = 0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < win_len; ++c) {
      if (!panel.observed(i, win_start + c)) avail[c][i] = 0;
    }
  }
  return avail;
}

}  // namespace

TrainingBatch generate_training_batch(const TimeSeriesPanel& panel,
                                      const SensorSet& sensors,
                                      const SamplingParams& params,
                                      const Normalization& norm, Rng& rng) {
  const std::size_t n = panel.nodes();
  const std::size_t p = panel.steps();
  const std::size_t h = params.h;
  const std::size_t u = params.u;
  if (h < 1) throw std::invalid_argument("generate_training_batch: h must be >= 1");
  if (n != sensors.size()) {
    throw std::invalid_argument("generate_training_batch: panel/sensor size mismatch");
  }
  if (p < h + u) {
    throw std::invalid_argument("generate_training_batch: panel too short (p < h + u)");
  }
  if (n < 2 || params.n_m >= n) {
    throw std::invalid_argument("generate_training_batch: n_m must leave at least one sender");
  }

  // 0-based legal range for the first target column j: the input window
  // [j-u, j+h) must fit in [0, p).
  const std::size_t j_lo = u;
  const std::size_t j_hi = p - h;  // inclusive

  TrainingBatch batch;
  batch.samples.reserve(params.batch);

  constexpr std::size_t kMaxRetries = 1000;
  for (std::size_t s = 0; s < params.batch; ++s) {
    std::size_t attempts = 0;
    for (;;) {
      if (++attempts > kMaxRetries) {
        throw std::runtime_error(
            "generate_training_batch: could not draw a usable sample "
            "(no observed target cells or no eligible senders)");
      }
      const std::size_t j = j_lo + rng.uniform_index(j_hi - j_lo + 1);
      std::vector<std::size_t> omega =
          rng.sample_without_replacement(n, params.n_m);

      const std::size_t win_start = j - u;
      const std::size_t win_len = h + u;

      TrainingSample sample;
      sample.window_start = j;
      sample.omega = omega;

      // Evaluation mask: target cells observed in the raw panel.
      sample.eval_mask.assign(n * h, 0);
      std::size_t eval_cnt = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < h; ++c) {
          if (panel.observed(i, j + c)) {
            sample.eval_mask[i * h + c] = 1;
            ++eval_cnt;
          }
        }
      }
      if (eval_cnt == 0) continue;  // nothing to score, redraw

      auto avail = window_availability(panel, win_start, win_len, omega);
      const bool uniform = std::all_of(
          avail.begin() + 1, avail.end(),
          [&](const std::vector<std::uint8_t>& col) { return col == avail[0]; });

      try {
        GraphSeq seq;
        if (uniform) {
          std::vector<std::size_t> masked;
          for (std::size_t i = 0; i < n; ++i) {
            if (!avail[0][i]) masked.push_back(i);
          }
          seq.graphs.push_back(build_masked_adjacency(sensors, params.k, masked));
        } else {
          seq.graphs.reserve(win_len);
          for (std::size_t c = 0; c < win_len; ++c) {
            seq.graphs.push_back(
                build_time_varying_adjacency(sensors, params.k, avail[c]));
          }
        }
        sample.a = std::move(seq);
      } catch (const std::invalid_argument&) {
        continue;  // a column lost all senders, redraw
      }
      sample.a_hat = build_full_adjacency(sensors, params.k);

      sample.x = Array({n, win_len}, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < win_len; ++c) {
          if (avail[c][i]) {
            sample.x.at(i, c) = norm.apply(panel.values.at(i, win_start + c));
          }
        }
      }
      for (std::size_t idx : omega) {  // explicit row zeroing
        for (std::size_t c = 0; c < win_len; ++c) sample.x.at(idx, c) = 0.0;
      }

      sample.target = Array({n, h}, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < h; ++c) {
          sample.target.at(i, c) = panel.values.at(i, j + c);
        }
      }

      batch.samples.push_back(std::move(sample));
      break;
    }
  }
  return batch;
}

}  // namespace satcn
