#pragma once

#include <string>
#include <vector>

#include "satcn/graph.hpp"
#include "satcn/sampling.hpp"

namespace satcn {

/// Sensor CSV: header decides the form.
///   id,x,y      -> Euclidean coordinates
///   id,lat,lon  -> haversine coordinates (degrees, distances in km)
///   id,<id1>,<id2>,...  (or first header cell empty) -> full distance matrix
SensorSet read_sensor_csv(const std::string& path);

/// Panel CSV: header `timestamp,<id>,...`; one row per time step; empty cells
/// are unobserved. Column order of `ids` defines node order.
struct PanelCsv {
  TimeSeriesPanel panel;
  std::vector<std::string> ids;
  std::vector<std::string> timestamps;
};

PanelCsv read_panel_csv(const std::string& path);

void write_panel_csv(const std::string& path, const TimeSeriesPanel& panel,
                     const std::vector<std::string>& ids,
                     const std::vector<std::string>& timestamps,
                     const std::string& header_comment = {});

void write_sensor_coords_csv(const std::string& path, const SensorSet& s,
                             Metric metric,
                             const std::string& header_comment = {});

void write_matrix_csv(const std::string& path, const Array& m,
                      const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels,
                      const std::string& corner,
                      const std::string& header_comment = {});

/// Generic table writer used for metric reports and loss histories.
void write_table_csv(const std::string& path,
                     const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows,
                     const std::string& header_comment = {});

std::string format_double(double v);

}  // namespace satcn
