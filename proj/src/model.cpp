#include "satcn/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "satcn/autodiff.hpp"
#include "satcn/errors.hpp"

namespace satcn {

void ArchConfig::validate() const {
  if (hidden.empty() || hidden.size() != tcn_widths.size()) {
    throw std::invalid_argument(
        "arch: hidden and tcn_widths must be nonempty and of equal length");
  }
  for (std::size_t c : hidden) {
    if (c == 0) throw std::invalid_argument("arch: zero channel width");
  }
  for (std::size_t w : tcn_widths) {
    if (w == 0) throw std::invalid_argument("arch: zero TCN width");
  }
  if (h == 0) throw std::invalid_argument("arch: h must be >= 1");
  if (k == 0) throw std::invalid_argument("arch: k must be >= 1");
  if (epsilon <= 0.0) throw std::invalid_argument("arch: epsilon must be > 0");
}

std::vector<std::pair<std::string, Array*>> SatcnModel::parameters() {
  std::vector<std::pair<std::string, Array*>> out;
  for (std::size_t b = 0; b < san.size(); ++b) {
    out.emplace_back("san" + std::to_string(b) + ".phi", &san[b].phi);
    out.emplace_back("san" + std::to_string(b) + ".bias", &san[b].bias);
    out.emplace_back("tcn" + std::to_string(b) + ".kernel", &tcn[b].kernel);
    out.emplace_back("tcn" + std::to_string(b) + ".bias", &tcn[b].bias);
  }
  out.emplace_back("proj.weight", &proj_w);
  out.emplace_back("proj.bias", &proj_b);
  return out;
}

std::vector<std::pair<std::string, const Array*>> SatcnModel::parameters() const {
  std::vector<std::pair<std::string, const Array*>> out;
  auto mut = const_cast<SatcnModel*>(this)->parameters();
  out.reserve(mut.size());
  for (auto& [name, arr] : mut) out.emplace_back(name, arr);
  return out;
}

void SatcnModel::set_deg(double value) {
  deg = value;
  for (auto& layer : san) layer.deg = value;
}

SatcnModel init_model(const ArchConfig& arch, Rng& rng) {
  arch.validate();
  SatcnModel m;
  m.arch = arch;

  auto glorot = [&rng](Array& w, std::size_t fan_in, std::size_t fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-a, a);
  };

  std::size_t cin = 1;
  for (std::size_t b = 0; b < arch.blocks(); ++b) {
    const std::size_t cout = arch.hidden[b];
    SanLayerParams san;
    san.phi = Array({cout, kStackFactor * cin});
    san.bias = Array({cout});
    san.activation = SanLayerParams::Activation::Relu;
    san.epsilon = arch.epsilon;
    glorot(san.phi, kStackFactor * cin, cout);
    m.san.push_back(std::move(san));

    const std::size_t w = arch.tcn_widths[b];
    TcnLayerParams tcn;
    tcn.kernel = Array({w, cout, cout});
    tcn.bias = Array({cout});
    glorot(tcn.kernel, w * cout, cout);
    m.tcn.push_back(std::move(tcn));
    cin = cout;
  }
  m.proj_w = Array({1, cin});
  m.proj_b = Array({1});
  glorot(m.proj_w, cin, 1);
  m.set_deg(1.0);
  return m;
}

double mae_loss(const Array& pred, const Array& target,
                const std::vector<std::uint8_t>& eval_mask) {
  if (!pred.same_shape(target)) {
    throw std::invalid_argument("mae_loss: shape mismatch");
  }
  if (eval_mask.size() != pred.size()) {
    throw std::invalid_argument("mae_loss: mask size mismatch");
  }
  double acc = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (eval_mask[i]) {
      acc += std::abs(pred[i] - target[i]);
      ++cnt;
    }
  }
  if (cnt == 0) throw std::invalid_argument("mae_loss: empty evaluation mask");
  return acc / static_cast<double>(cnt);
}

namespace {

// Per-column broadcast constants and scaler factors for a SAN layer.
Array broadcast_dist_stat(ad::GraphRef g, std::size_t n, std::size_t T,
                          std::size_t c, double eps, bool sigma) {
  Array out({n, T, c}, 0.0);
  std::vector<double> mu(n), sd(n);
  for (std::size_t t = 0; t < T; ++t) {
    if (t == 0 || !g.single) agg::dist_stats(g.at(t), eps, mu.data(), sd.data());
    const std::vector<double>& v = sigma ? sd : mu;
    for (std::size_t i = 0; i < n; ++i) {
      double* dst = out.data() + (i * T + t) * c;
      std::fill(dst, dst + c, v[i]);
    }
  }
  return out;
}

Array scaler_matrix(ad::GraphRef g, std::size_t n, std::size_t T, double deg,
                    bool amplification) {
  Array out({n, T}, 0.0);
  std::vector<double> amp(n), att(n);
  for (std::size_t t = 0; t < T; ++t) {
    if (t == 0 || !g.single) {
      agg::scaler_factors(g.at(t), deg, amp.data(), att.data());
    }
    const std::vector<double>& v = amplification ? amp : att;
    for (std::size_t i = 0; i < n; ++i) out.at(i, t) = v[i];
  }
  return out;
}

ad::NodeId san_block_on_tape(ad::Tape& tape, ad::NodeId x, ad::GraphRef g,
                             ad::NodeId phi, ad::NodeId bias,
                             const SanLayerParams& meta) {
  const Array& xv = tape.value(x);
  const std::size_t n = xv.dim(0), T = xv.dim(1), c = xv.dim(2);

  const ad::NodeId m = tape.neighbor_mean(x, g);
  const ad::NodeId wm = tape.neighbor_weighted_mean(x, g);
  const ad::NodeId sm = tape.neighbor_softmax(x, g);
  const ad::NodeId sn = tape.neg(tape.neighbor_softmax(tape.neg(x), g));
  const ad::NodeId sd = tape.neighbor_std(x, g, meta.epsilon);
  const ad::NodeId md =
      tape.constant(broadcast_dist_stat(g, n, T, c, meta.epsilon, false));
  const ad::NodeId sdd =
      tape.constant(broadcast_dist_stat(g, n, T, c, meta.epsilon, true));

  const ad::NodeId a7 = tape.concat_channels({m, wm, sm, sn, sd, md, sdd});
  const ad::NodeId amp =
      tape.row_scale(a7, scaler_matrix(g, n, T, meta.deg, true));
  const ad::NodeId att =
      tape.row_scale(a7, scaler_matrix(g, n, T, meta.deg, false));
  const ad::NodeId stacked = tape.concat_channels({a7, amp, att});

  const ad::NodeId lin = tape.linear(stacked, phi, bias);
  return meta.activation == SanLayerParams::Activation::Relu ? tape.relu(lin)
                                                             : lin;
}

// Shared tape construction: normalized input [n, T] -> denormalized
// prediction [n, T - u].
ad::NodeId forward_on_tape(ad::Tape& tape, const std::vector<ad::NodeId>& leaves,
                           const SatcnModel& m, const Array& x,
                           ad::GraphRef a, ad::GraphRef a_hat) {
  if (x.rank() != 2) {
    throw std::invalid_argument("satcn forward: input must be [n, T]");
  }
  const std::size_t n = x.dim(0), T = x.dim(1);
  if (T <= m.arch.u()) {
    throw std::invalid_argument("satcn forward: input length must exceed u");
  }
  if (a.seq && a.seq->per_column() && a.seq->graphs.size() != T) {
    throw std::invalid_argument("satcn forward: per-column graph count mismatch");
  }

  Array x3 = Array::from({n, T, 1}, x.storage());
  ad::NodeId cur = tape.constant(std::move(x3));
  for (std::size_t b = 0; b < m.san.size(); ++b) {
    const ad::GraphRef g = b == 0 ? a : a_hat;
    cur = san_block_on_tape(tape, cur, g, leaves[4 * b], leaves[4 * b + 1],
                            m.san[b]);
    cur = tape.conv1d(cur, leaves[4 * b + 2], leaves[4 * b + 3]);
  }
  const std::size_t np = m.san.size();
  cur = tape.linear(cur, leaves[4 * np], leaves[4 * np + 1]);
  cur = tape.squeeze_last(cur);
  return tape.affine(cur, m.norm.std, m.norm.mean);
}

void check_graph_nodes(const NeighborGraph& g, std::size_t n, const char* what) {
  if (g.node_count() != n) {
    throw std::invalid_argument(std::string(what) + ": graph node count mismatch");
  }
}

}  // namespace

namespace detail {

Array forward_block(const Array& x, const GraphSeq& a, const NeighborGraph& a_hat,
                    const SatcnModel& m) {
  const std::size_t n = x.dim(0), T = x.dim(1);
  for (const auto& g : a.graphs) check_graph_nodes(g, n, "satcn forward");
  check_graph_nodes(a_hat, n, "satcn forward");

  GraphSeq full;
  full.graphs.push_back(a_hat);

  Array cur = Array::from({n, T, 1}, x.storage());
  for (std::size_t b = 0; b < m.san.size(); ++b) {
    cur = san_forward(cur, b == 0 ? a : full, m.san[b]);
    cur = tcn_forward(cur, m.tcn[b]);
  }
  // Shared affine projection to one channel, then denormalization.
  const std::size_t Tout = cur.dim(1), c = cur.dim(2);
  Array out({n, Tout}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < Tout; ++t) {
      double acc = m.proj_b[0];
      for (std::size_t q = 0; q < c; ++q) acc += m.proj_w[q] * cur.at(i, t, q);
      out.at(i, t) = m.norm.invert(acc);
    }
  }
  return out;
}

double batch_loss_and_gradients(const SatcnModel& m, const TrainingBatch& batch,
                                bool masked_only, std::vector<Array>& grads) {
  if (batch.samples.empty()) {
    throw std::invalid_argument("batch_loss_and_gradients: empty batch");
  }
  ad::Tape tape;
  const auto params = m.parameters();
  std::vector<ad::NodeId> leaves;
  leaves.reserve(params.size());
  for (const auto& [name, arr] : params) leaves.push_back(tape.leaf(*arr));

  std::vector<ad::NodeId> losses;
  for (const auto& sample : batch.samples) {
    std::vector<std::uint8_t> eval = sample.eval_mask;
    if (masked_only) {
      const std::size_t h = sample.target.dim(1);
      std::vector<std::uint8_t> in_omega(sample.target.dim(0), 0);
      for (std::size_t idx : sample.omega) in_omega[idx] = 1;
      for (std::size_t i = 0; i < in_omega.size(); ++i) {
        if (!in_omega[i]) {
          std::fill(eval.begin() + i * h, eval.begin() + (i + 1) * h, 0);
        }
      }
      if (std::none_of(eval.begin(), eval.end(),
                       [](std::uint8_t v) { return v != 0; })) {
        continue;  // no observed cells on simulated-unknown rows
      }
    }
    const ad::NodeId pred =
        forward_on_tape(tape, leaves, m, sample.x,
                        ad::GraphRef{&sample.a, nullptr},
                        ad::GraphRef{nullptr, &sample.a_hat});
    losses.push_back(tape.masked_mae(pred, sample.target, std::move(eval)));
  }
  if (losses.empty()) {
    throw NumericalError("training batch has no evaluable sample");
  }
  const ad::NodeId loss =
      tape.scaled_sum(losses, 1.0 / static_cast<double>(losses.size()));
  tape.backward(loss);

  grads.clear();
  grads.reserve(leaves.size());
  for (ad::NodeId id : leaves) grads.push_back(tape.grad(id));
  return tape.value(loss)[0];
}

}  // namespace detail

Array satcn_forward(const Array& x, const GraphSeq& a, const NeighborGraph& a_hat,
                    const SatcnModel& m) {
  if (x.rank() != 2) {
    throw std::invalid_argument("satcn_forward: input must be [n, T]");
  }
  const std::size_t n = x.dim(0), T = x.dim(1), u = m.arch.u();
  if (T <= u) {
    throw std::invalid_argument("satcn_forward: input length must exceed u");
  }
  if (a.per_column() && a.graphs.size() != T) {
    throw std::invalid_argument("satcn_forward: per-column graph count mismatch");
  }

  constexpr std::size_t kChunk = 128;  // output columns per block
  const std::size_t T_out = T - u;
  if (T_out <= kChunk) return detail::forward_block(x, a, a_hat, m);

  Array out({n, T_out}, 0.0);
  for (std::size_t s = 0; s < T_out; s += kChunk) {
    const std::size_t e = std::min(s + kChunk, T_out);
    const std::size_t len = e - s + u;
    Array sub({n, len}, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < len; ++t) sub.at(i, t) = x.at(i, s + t);
    }
    GraphSeq sub_seq;
    if (a.per_column()) {
      sub_seq.graphs.assign(a.graphs.begin() + s, a.graphs.begin() + s + len);
    } else {
      sub_seq.graphs = a.graphs;
    }
    const Array block = detail::forward_block(sub, sub_seq, a_hat, m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = s; t < e; ++t) out.at(i, t) = block.at(i, t - s);
    }
  }
  return out;
}

Array krige(const SatcnModel& m, const TimeSeriesPanel& observed,
            const SensorSet& all_sensors, const std::vector<std::size_t>& unknown) {
  const std::size_t n_all = all_sensors.size();
  const std::size_t T = observed.steps();
  const std::size_t u = m.arch.u();

  std::set<std::size_t> unknown_set(unknown.begin(), unknown.end());
  if (unknown_set.size() != unknown.size()) {
    throw std::invalid_argument("krige: duplicate unknown indices");
  }
  for (std::size_t idx : unknown) {
    if (idx >= n_all) throw std::invalid_argument("krige: unknown index out of range");
  }
  if (observed.nodes() + unknown.size() != n_all) {
    throw std::invalid_argument(
        "krige: observed panel rows must cover exactly the non-unknown sensors");
  }
  if (T <= u) {
    throw std::invalid_argument("krige: need more than u time steps");
  }
  if (unknown.empty()) {
    return Array({0, T - u}, 0.0);
  }

  // Map observed panel rows onto the full sensor set (ascending complement).
  std::vector<std::size_t> obs_index;
  obs_index.reserve(n_all - unknown.size());
  for (std::size_t i = 0; i < n_all; ++i) {
    if (!unknown_set.count(i)) obs_index.push_back(i);
  }

  Array x({n_all, T}, 0.0);
  std::vector<std::vector<std::uint8_t>> avail(T,
                                               std::vector<std::uint8_t>(n_all, 0));
  for (std::size_t r = 0; r < obs_index.size(); ++r) {
    const std::size_t i = obs_index[r];
    for (std::size_t t = 0; t < T; ++t) {
      if (observed.observed(r, t)) {
        x.at(i, t) = m.norm.apply(observed.values.at(r, t));
        avail[t][i] = 1;
      }
    }
  }

  GraphSeq a;
  const bool uniform = std::all_of(
      avail.begin() + 1, avail.end(),
      [&](const std::vector<std::uint8_t>& col) { return col == avail[0]; });
  if (uniform) {
    std::vector<std::size_t> masked;
    for (std::size_t i = 0; i < n_all; ++i) {
      if (!avail[0][i]) masked.push_back(i);
    }
    a.graphs.push_back(build_masked_adjacency(all_sensors, m.arch.k, masked));
  } else {
    a.graphs.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
      a.graphs.push_back(
          build_time_varying_adjacency(all_sensors, m.arch.k, avail[t]));
    }
  }
  const NeighborGraph a_hat = build_full_adjacency(all_sensors, m.arch.k);

  const Array full = satcn_forward(x, a, a_hat, m);
  Array out({unknown.size(), T - u}, 0.0);
  std::vector<std::size_t> sorted_unknown(unknown.begin(), unknown.end());
  std::sort(sorted_unknown.begin(), sorted_unknown.end());
  for (std::size_t r = 0; r < sorted_unknown.size(); ++r) {
    for (std::size_t t = 0; t + u < T; ++t) {
      out.at(r, t) = full.at(sorted_unknown[r], t);
    }
  }
  return out;
}

namespace {

struct AdamState {
  std::vector<Array> m1, m2;
  std::size_t t = 0;
};

void adam_step(std::vector<std::pair<std::string, Array*>>& params,
               const std::vector<Array>& grads, AdamState& state,
               const TrainConfig& cfg, double lr) {
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Array& w = *params[p].second;
    const Array& g = grads[p];
    Array& m1 = state.m1[p];
    Array& m2 = state.m2[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * g[i];
      m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m1[i] / bc1;
      const double vhat = m2[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

// Validation MAE: krige the held-out sensors from the training sensors over
// the tail of the panel and score against their observed values.
double validation_mae(const SatcnModel& m, const TimeSeriesPanel& panel,
                      const SensorSet& sensors,
                      const std::vector<std::size_t>& train_idx,
                      const std::vector<std::size_t>& val_idx,
                      std::size_t val_window) {
  const std::size_t T = panel.steps();
  const std::size_t u = m.arch.u();
  const std::size_t window = std::min(val_window == 0 ? T : val_window, T);
  if (window <= u) return std::numeric_limits<double>::infinity();
  const std::size_t t0 = T - window;

  TimeSeriesPanel obs;
  obs.values = Array({train_idx.size(), window}, 0.0);
  obs.obs_mask.assign(train_idx.size() * window, 0);
  for (std::size_t r = 0; r < train_idx.size(); ++r) {
    for (std::size_t t = 0; t < window; ++t) {
      obs.values.at(r, t) = panel.values.at(train_idx[r], t0 + t);
      obs.obs_mask[r * window + t] = panel.observed(train_idx[r], t0 + t) ? 1 : 0;
    }
  }

  const Array est = krige(m, obs, sensors, val_idx);
  double acc = 0.0;
  std::size_t cnt = 0;
  for (std::size_t r = 0; r < val_idx.size(); ++r) {
    for (std::size_t t = 0; t + u < window; ++t) {
      const std::size_t col = t0 + u + t;
      if (!panel.observed(val_idx[r], col)) continue;
      acc += std::abs(est.at(r, t) - panel.values.at(val_idx[r], col));
      ++cnt;
    }
  }
  return cnt > 0 ? acc / static_cast<double>(cnt)
                 : std::numeric_limits<double>::infinity();
}

}  // namespace

SatcnModel train(const TimeSeriesPanel& panel, const SensorSet& sensors,
                 const ArchConfig& arch, const TrainConfig& cfg,
                 TrainHistory* history) {
  arch.validate();
  if (cfg.lr <= 0.0) throw std::invalid_argument("train: learning rate must be > 0");
  if (cfg.batch == 0) throw std::invalid_argument("train: batch size must be >= 1");
  const std::size_t n = panel.nodes();
  if (n != sensors.size()) {
    throw std::invalid_argument("train: panel/sensor size mismatch");
  }
  if (n < 2) throw std::invalid_argument("train: need at least 2 sensors");

  Rng rng(cfg.seed);

  // Hold out validation sensors from the sampling pool.
  std::size_t n_val = static_cast<std::size_t>(
      std::floor(cfg.val_fraction * static_cast<double>(n)));
  if (n - n_val < 2) n_val = n >= 2 ? n - 2 : 0;
  std::vector<std::size_t> val_idx, train_idx;
  if (n_val >= 1) {
    val_idx = rng.sample_without_replacement(n, n_val);
  }
  {
    std::set<std::size_t> vs(val_idx.begin(), val_idx.end());
    for (std::size_t i = 0; i < n; ++i) {
      if (!vs.count(i)) train_idx.push_back(i);
    }
  }

  SensorSet train_sensors = subset_sensors(sensors, train_idx);
  TimeSeriesPanel train_panel;
  const std::size_t T = panel.steps();
  train_panel.values = Array({train_idx.size(), T}, 0.0);
  train_panel.obs_mask.assign(train_idx.size() * T, 0);
  for (std::size_t r = 0; r < train_idx.size(); ++r) {
    for (std::size_t t = 0; t < T; ++t) {
      train_panel.values.at(r, t) = panel.values.at(train_idx[r], t);
      train_panel.obs_mask[r * T + t] = panel.observed(train_idx[r], t) ? 1 : 0;
    }
  }

  SatcnModel model = init_model(arch, rng);
  model.norm = compute_normalization(train_panel);
  model.set_deg(compute_deg(build_full_adjacency(train_sensors, arch.k)));

  SamplingParams sampling;
  sampling.h = arch.h;
  sampling.u = arch.u();
  sampling.k = arch.k;
  sampling.n_m = arch.effective_n_m(train_idx.size());
  sampling.batch = cfg.batch;

  auto params = model.parameters();
  AdamState adam;
  for (const auto& [name, arr] : params) {
    adam.m1.emplace_back(arr->shape(), 0.0);
    adam.m2.emplace_back(arr->shape(), 0.0);
  }

  SatcnModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_iter = 0;
  std::size_t bad_streak = 0;
  bool has_validation = !val_idx.empty();
  bool stopped_early = false;

  std::vector<Array> grads;
  for (std::size_t iter = 1; iter <= cfg.iterations; ++iter) {
    const TrainingBatch batch = generate_training_batch(
        train_panel, train_sensors, sampling, model.norm, rng);
    const double loss = detail::batch_loss_and_gradients(
        model, batch, arch.loss_masked_only, grads);
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "train: non-finite loss " << loss << " at iteration " << iter;
      throw NumericalError(os.str());
    }
    // Cosine learning-rate decay to lr * lr_floor.
    const double progress =
        cfg.iterations > 1
            ? static_cast<double>(iter - 1) / static_cast<double>(cfg.iterations - 1)
            : 1.0;
    const double lr = cfg.lr * (cfg.lr_floor +
                                (1.0 - cfg.lr_floor) * 0.5 *
                                    (1.0 + std::cos(M_PI * progress)));
    adam_step(params, grads, adam, cfg, lr);
    if (history) history->train_loss.push_back(loss);

    const bool validate_now =
        has_validation &&
        (iter % cfg.val_every == 0 || iter == cfg.iterations);
    if (validate_now) {
      const double val = validation_mae(model, panel, sensors, train_idx,
                                        val_idx, cfg.val_window);
      if (history) history->val_mae.emplace_back(iter, val);
      if (val < best_val) {
        best_val = val;
        best = model;
        best_iter = iter;
        bad_streak = 0;
      } else {
        ++bad_streak;
        if (cfg.patience > 0 && bad_streak >= cfg.patience) {
          stopped_early = true;
        }
      }
    }
    if (stopped_early) break;
  }

  if (history) history->best_iteration = best_iter;
  if (has_validation && best_iter > 0) return best;
  return model;
}

}  // namespace satcn
