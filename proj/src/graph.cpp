#include "satcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace satcn {

namespace {

constexpr double kEarthRadiusKm = 6371.0;

std::vector<std::string> default_ids(std::size_t n) {
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = "s" + std::to_string(i);
  return ids;
}

double compute_d_max(const Array& dist) {
  const std::size_t n = dist.dim(0);
  double d_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d_max = std::max(d_max, dist.at(i, j));
    }
  }
  return d_max;
}

// Core k-NN sender selection shared by all three adjacency builders.
NeighborGraph build_graph(const SensorSet& s, std::size_t k,
                          const std::vector<std::uint8_t>& sender_ok,
                          GraphKind kind) {
  const std::size_t n = s.size();
  if (k == 0) throw std::invalid_argument("adjacency: k must be >= 1");
  if (n < 2) throw std::invalid_argument("adjacency: need at least 2 sensors");
  if (s.d_max <= 0.0) throw std::invalid_argument("adjacency: d_max must be > 0");
  bool any_sender = false;
  for (std::uint8_t ok : sender_ok) any_sender = any_sender || ok != 0;
  if (!any_sender) {
    throw std::invalid_argument("adjacency: no eligible sender (all nodes masked)");
  }

  NeighborGraph g;
  g.k = k;
  g.kind = kind;
  g.receivers.resize(n);

  std::vector<std::pair<double, std::size_t>> cand;  // (dist, sender index)
  for (std::size_t j = 0; j < n; ++j) {
    cand.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j || !sender_ok[i]) continue;
      cand.emplace_back(s.dist.at(i, j), i);
    }
    const std::size_t take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + take, cand.end());
    auto& edges = g.receivers[j];
    edges.reserve(take);
    for (std::size_t e = 0; e < take; ++e) {
      edges.push_back({cand[e].second, 1.0 - cand[e].first / s.d_max});
    }
  }
  return g;
}

}  // namespace

double haversine_km(double lat1_deg, double lon1_deg, double lat2_deg,
                    double lon2_deg) {
  const double to_rad = M_PI / 180.0;
  const double lat1 = lat1_deg * to_rad;
  const double lat2 = lat2_deg * to_rad;
  const double dlat = (lat2_deg - lat1_deg) * to_rad;
  const double dlon = (lon2_deg - lon1_deg) * to_rad;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1) * std::cos(lat2) * std::sin(dlon / 2) *
                       std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

SensorSet build_distance_matrix(const std::vector<std::array<double, 2>>& coords,
                                Metric metric, std::vector<std::string> ids) {
  const std::size_t n = coords.size();
  if (n < 2) {
    throw std::invalid_argument("build_distance_matrix: need at least 2 sensors");
  }
  if (ids.empty()) ids = default_ids(n);
  if (ids.size() != n) {
    throw std::invalid_argument("build_distance_matrix: ids/coords size mismatch");
  }

  Array dist({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d;
      if (metric == Metric::Euclidean) {
        const double dx = coords[i][0] - coords[j][0];
        const double dy = coords[i][1] - coords[j][1];
        d = std::sqrt(dx * dx + dy * dy);
      } else {
        d = haversine_km(coords[i][0], coords[i][1], coords[j][0], coords[j][1]);
      }
      dist.at(i, j) = d;
      dist.at(j, i) = d;
    }
  }

  SensorSet s;
  s.ids = std::move(ids);
  s.coords = coords;
  s.dist = std::move(dist);
  s.d_max = compute_d_max(s.dist);
  if (s.d_max <= 0.0) {
    throw std::invalid_argument(
        "build_distance_matrix: all positions identical (d_max = 0)");
  }
  return s;
}

SensorSet make_sensor_set(std::vector<std::string> ids, Array dist) {
  const std::size_t n = ids.size();
  if (n < 2) throw std::invalid_argument("make_sensor_set: need at least 2 sensors");
  if (dist.rank() != 2 || dist.dim(0) != n || dist.dim(1) != n) {
    throw std::invalid_argument("make_sensor_set: dist must be n x n");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (dist.at(i, i) != 0.0) {
      throw std::invalid_argument("make_sensor_set: nonzero diagonal");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (dist.at(i, j) < 0.0) {
        throw std::invalid_argument("make_sensor_set: negative distance");
      }
      if (dist.at(i, j) != dist.at(j, i)) {
        throw std::invalid_argument("make_sensor_set: asymmetric distance matrix");
      }
    }
  }
  SensorSet s;
  s.ids = std::move(ids);
  s.dist = std::move(dist);
  s.d_max = compute_d_max(s.dist);
  if (s.d_max <= 0.0) {
    throw std::invalid_argument("make_sensor_set: d_max = 0");
  }
  return s;
}

SensorSet subset_sensors(const SensorSet& s, const std::vector<std::size_t>& indices) {
  const std::size_t m = indices.size();
  if (m < 2) throw std::invalid_argument("subset_sensors: need at least 2 sensors");
  SensorSet out;
  out.ids.reserve(m);
  Array dist({m, m}, 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    if (indices[a] >= s.size()) {
      throw std::invalid_argument("subset_sensors: index out of range");
    }
    out.ids.push_back(s.ids[indices[a]]);
    if (!s.coords.empty()) out.coords.push_back(s.coords[indices[a]]);
    for (std::size_t b = 0; b < m; ++b) {
      dist.at(a, b) = s.dist.at(indices[a], indices[b]);
    }
  }
  out.dist = std::move(dist);
  out.d_max = compute_d_max(out.dist);
  if (out.d_max <= 0.0) {
    throw std::invalid_argument("subset_sensors: d_max = 0 in subset");
  }
  return out;
}

void validate_sensor_set(const SensorSet& s, Metric metric) {
  const std::size_t n = s.size();
  if (n < 2) throw std::invalid_argument("sensor set: need at least 2 sensors");
  if (s.dist.rank() != 2 || s.dist.dim(0) != n || s.dist.dim(1) != n) {
    throw std::invalid_argument("sensor set: dist shape mismatch");
  }
  double d_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (s.dist.at(i, i) != 0.0) {
      throw std::invalid_argument("sensor set: nonzero diagonal");
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double d = s.dist.at(i, j);
      if (d < 0.0) throw std::invalid_argument("sensor set: negative distance");
      if (d != s.dist.at(j, i)) {
        throw std::invalid_argument("sensor set: asymmetric distance matrix");
      }
      if (i != j) d_max = std::max(d_max, d);
    }
  }
  if (s.d_max <= 0.0 || std::abs(s.d_max - d_max) > 1e-12 * std::max(1.0, d_max)) {
    throw std::invalid_argument("sensor set: d_max inconsistent with dist");
  }
  if (!s.coords.empty()) {
    if (s.coords.size() != n) {
      throw std::invalid_argument("sensor set: coords size mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double d;
        if (metric == Metric::Euclidean) {
          const double dx = s.coords[i][0] - s.coords[j][0];
          const double dy = s.coords[i][1] - s.coords[j][1];
          d = std::sqrt(dx * dx + dy * dy);
        } else {
          d = haversine_km(s.coords[i][0], s.coords[i][1], s.coords[j][0],
                           s.coords[j][1]);
        }
        const double tol = 1e-9 * std::max(1.0, std::abs(d));
        if (std::abs(d - s.dist.at(i, j)) > tol) {
          throw std::invalid_argument("sensor set: dist does not match coords");
        }
      }
    }
  }
}

NeighborGraph build_masked_adjacency(const SensorSet& s, std::size_t k,
                                     const std::vector<std::size_t>& omega) {
  std::vector<std::uint8_t> sender_ok(s.size(), 1);
  for (std::size_t idx : omega) {
    if (idx >= s.size()) {
      throw std::invalid_argument("build_masked_adjacency: omega index out of range");
    }
    sender_ok[idx] = 0;
  }
  return build_graph(s, k, sender_ok, GraphKind::Masked);
}

NeighborGraph build_full_adjacency(const SensorSet& s, std::size_t k) {
  std::vector<std::uint8_t> sender_ok(s.size(), 1);
  return build_graph(s, k, sender_ok, GraphKind::Full);
}

NeighborGraph build_time_varying_adjacency(const SensorSet& s, std::size_t k,
                                           const std::vector<std::uint8_t>& available) {
  if (available.size() != s.size()) {
    throw std::invalid_argument("build_time_varying_adjacency: availability size mismatch");
  }
  return build_graph(s, k, available, GraphKind::TimeVarying);
}

}  // namespace satcn
