#pragma once

#include <cstdint>
#include <vector>

#include "satcn/graph.hpp"
#include "satcn/sampling.hpp"

namespace satcn {

/// Smooth separable test field: random sensors in the unit square, a sum of
/// radial spatial bumps times sinusoids in time, plus optional Gaussian
/// noise. The noiseless values are kept for oracle evaluation.
struct SyntheticFieldSpec {
  std::size_t n = 50;
  std::size_t steps = 2000;
  std::size_t bases = 5;
  double length_scale = 0.35;
  std::vector<double> frequencies;  // cycles per step; empty -> seeded draws
  double noise_std = 0.0;
  std::uint64_t seed = 0;
};

struct SyntheticField {
  SensorSet sensors;
  TimeSeriesPanel panel;  // noisy observations, fully observed
  Array truth;            // [n, steps] noiseless
};

SyntheticField generate_synthetic(const SyntheticFieldSpec& spec);

/// Standard deviation of the noiseless field for picking relative noise
/// levels (generates the field without noise under the same seed).
double synthetic_signal_std(SyntheticFieldSpec spec);

}  // namespace satcn
