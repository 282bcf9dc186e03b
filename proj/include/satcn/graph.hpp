#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "satcn/array.hpp"

namespace satcn {

enum class Metric { Euclidean, Haversine };

/// Sensor identities plus pairwise distances. d_max is the maximum pairwise
/// distance within this set and normalizes all edge weights built from it.
struct SensorSet {
  std::vector<std::string> ids;
  std::vector<std::array<double, 2>> coords;  // empty when only distances are known
  Array dist;                                 // [n, n] symmetric, zero diagonal
  double d_max = 0.0;

  std::size_t size() const { return ids.size(); }
};

/// One directed edge: `sender` passes its message to the owning receiver.
struct GraphEdge {
  std::size_t sender;
  double weight;  // 1 - dist/d_max
};

enum class GraphKind { Masked, Full, TimeVarying };

/// Weighted directed k-NN sender lists. receivers[j] holds node j's senders
/// sorted by ascending distance, ties by ascending sender index. Lists may be
/// shorter than k (or empty) when few eligible senders exist.
struct NeighborGraph {
  std::vector<std::vector<GraphEdge>> receivers;
  std::size_t k = 0;
  GraphKind kind = GraphKind::Full;

  std::size_t node_count() const { return receivers.size(); }

  double incoming_weight_sum(std::size_t i) const {
    double s = 0.0;
    for (const auto& e : receivers[i]) s += e.weight;
    return s;
  }
};

SensorSet build_distance_matrix(const std::vector<std::array<double, 2>>& coords,
                                Metric metric,
                                std::vector<std::string> ids = {});

/// SensorSet from an explicit distance matrix (validates symmetry, zero
/// diagonal, nonnegativity; computes d_max).
SensorSet make_sensor_set(std::vector<std::string> ids, Array dist);

/// Restriction to a subset of sensors; d_max is recomputed over the subset.
SensorSet subset_sensors(const SensorSet& s, const std::vector<std::size_t>& indices);

/// Checks the SensorSet invariants (symmetry, diagonal, d_max, and coords vs
/// dist agreement when coordinates are present). Throws on violation.
void validate_sensor_set(const SensorSet& s, Metric metric = Metric::Euclidean);

NeighborGraph build_masked_adjacency(const SensorSet& s, std::size_t k,
                                     const std::vector<std::size_t>& omega);

NeighborGraph build_full_adjacency(const SensorSet& s, std::size_t k);

/// Masked graph for one time step: nodes with available[i] == 0 cannot send.
NeighborGraph build_time_varying_adjacency(const SensorSet& s, std::size_t k,
                                           const std::vector<std::uint8_t>& available);

double haversine_km(double lat1_deg, double lon1_deg, double lat2_deg,
                    double lon2_deg);

}  // namespace satcn
