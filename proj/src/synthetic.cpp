#include "satcn/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include "satcn/rng.hpp"

namespace satcn {

namespace {

void check_spec(const SyntheticFieldSpec& spec) {
  if (spec.n < 4) throw std::invalid_argument("synthetic: need at least 4 sensors");
  if (spec.steps < 1) throw std::invalid_argument("synthetic: need at least 1 step");
  if (spec.bases < 1) throw std::invalid_argument("synthetic: need at least 1 basis");
  if (spec.length_scale <= 0.0) {
    throw std::invalid_argument("synthetic: length scale must be > 0");
  }
  if (spec.noise_std < 0.0) {
    throw std::invalid_argument("synthetic: noise std must be >= 0");
  }
}

Array noiseless_field(const SyntheticFieldSpec& spec, Rng& rng,
                      std::vector<std::array<double, 2>>& coords) {
  coords.resize(spec.n);
  for (auto& c : coords) {
    c[0] = rng.uniform();
    c[1] = rng.uniform();
  }

  struct Basis {
    double cx, cy, amp, freq, phase;
  };
  std::vector<Basis> bases(spec.bases);
  for (std::size_t b = 0; b < spec.bases; ++b) {
    Basis& bb = bases[b];
    bb.cx = rng.uniform();
    bb.cy = rng.uniform();
    bb.amp = rng.uniform(0.5, 1.5);
    bb.freq = spec.frequencies.empty()
                  ? rng.uniform(1.0 / 400.0, 1.0 / 50.0)
                  : spec.frequencies[b % spec.frequencies.size()];
    bb.phase = rng.uniform(0.0, 2.0 * M_PI);
  }

  const double inv_2l2 = 1.0 / (2.0 * spec.length_scale * spec.length_scale);
  Array truth({spec.n, spec.steps}, 0.0);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (const Basis& bb : bases) {
      const double dx = coords[i][0] - bb.cx;
      const double dy = coords[i][1] - bb.cy;
      const double spatial = bb.amp * std::exp(-(dx * dx + dy * dy) * inv_2l2);
      for (std::size_t t = 0; t < spec.steps; ++t) {
        truth.at(i, t) +=
            spatial *
            std::sin(2.0 * M_PI * bb.freq * static_cast<double>(t) + bb.phase);
      }
    }
  }
  return truth;
}

}  // namespace

SyntheticField generate_synthetic(const SyntheticFieldSpec& spec) {
  check_spec(spec);
  Rng rng(spec.seed);
  std::vector<std::array<double, 2>> coords;
  Array truth = noiseless_field(spec, rng, coords);

  SyntheticField field;
  field.sensors = build_distance_matrix(coords, Metric::Euclidean);
  Array noisy = truth;
  if (spec.noise_std > 0.0) {
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      noisy[i] += spec.noise_std * rng.normal();
    }
  }
  field.panel = TimeSeriesPanel::fully_observed(std::move(noisy), "synthetic");
  field.truth = std::move(truth);
  return field;
}

double synthetic_signal_std(SyntheticFieldSpec spec) {
  check_spec(spec);
  spec.noise_std = 0.0;
  Rng rng(spec.seed);
  std::vector<std::array<double, 2>> coords;
  const Array truth = noiseless_field(spec, rng, coords);
  double mean = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) mean += truth[i];
  mean /= static_cast<double>(truth.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(truth.size()));
}

}  // namespace satcn
