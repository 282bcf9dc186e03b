#include "satcn/csv.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "satcn/errors.hpp"

namespace satcn {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void fail(const std::string& path, std::size_t line,
                       std::size_t col, const std::string& msg) {
  std::ostringstream os;
  os << path << ":" << line << ":" << col << ": " << msg;
  throw DataError(os.str());
}

double parse_double(const std::string& cell, const std::string& path,
                    std::size_t line, std::size_t col) {
  const std::string t = trim(cell);
  double v = 0.0;
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    fail(path, line, col, "expected a number, got '" + cell + "'");
  }
  return v;
}

// Reads all lines, skipping leading '#' comment lines (artifact headers).
std::vector<std::pair<std::size_t, std::string>> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open file");
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line[0] == '#') continue;
    if (trim(line).empty()) continue;
    lines.emplace_back(no, line);
  }
  return lines;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

SensorSet read_sensor_csv(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.size() < 2) throw DataError(path + ": expected a header and data rows");
  auto header = split_line(lines[0].second);
  for (auto& c : header) c = trim(c);

  const bool coord_euclid =
      header.size() == 3 && header[0] == "id" && header[1] == "x" && header[2] == "y";
  const bool coord_haversine =
      header.size() == 3 && header[0] == "id" && header[1] == "lat" && header[2] == "lon";

  if (coord_euclid || coord_haversine) {
    std::vector<std::string> ids;
    std::vector<std::array<double, 2>> coords;
    for (std::size_t r = 1; r < lines.size(); ++r) {
      const auto& [no, text] = lines[r];
      auto cells = split_line(text);
      if (cells.size() != 3) fail(path, no, 1, "expected 3 cells (id,a,b)");
      ids.push_back(trim(cells[0]));
      coords.push_back({parse_double(cells[1], path, no, 2),
                        parse_double(cells[2], path, no, 3)});
    }
    return build_distance_matrix(
        coords, coord_euclid ? Metric::Euclidean : Metric::Haversine, ids);
  }

  // Distance-matrix form: header cells after the first are ids.
  if (header.size() < 3) {
    fail(path, lines[0].first, 1,
         "unrecognized sensor header (want id,x,y / id,lat,lon / id,<ids...>)");
  }
  std::vector<std::string> ids(header.begin() + 1, header.end());
  const std::size_t n = ids.size();
  if (lines.size() - 1 != n) {
    fail(path, lines.back().first, 1,
         "distance matrix must have one row per header id");
  }
  Array dist({n, n}, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& [no, text] = lines[r + 1];
    auto cells = split_line(text);
    if (cells.size() != n + 1) fail(path, no, 1, "expected id plus n distances");
    if (trim(cells[0]) != ids[r]) {
      fail(path, no, 1, "row id '" + trim(cells[0]) + "' does not match header order");
    }
    for (std::size_t cidx = 0; cidx < n; ++cidx) {
      dist.at(r, cidx) = parse_double(cells[cidx + 1], path, no, cidx + 2);
    }
  }
  try {
    return make_sensor_set(std::move(ids), std::move(dist));
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  }
}

PanelCsv read_panel_csv(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.size() < 2) throw DataError(path + ": expected a header and data rows");
  auto header = split_line(lines[0].second);
  if (header.size() < 2) {
    fail(path, lines[0].first, 1, "panel header needs timestamp plus sensor ids");
  }

  PanelCsv out;
  for (std::size_t c = 1; c < header.size(); ++c) out.ids.push_back(trim(header[c]));
  const std::size_t n = out.ids.size();
  const std::size_t T = lines.size() - 1;

  out.panel.values = Array({n, T}, 0.0);
  out.panel.obs_mask.assign(n * T, 0);
  out.timestamps.reserve(T);

  for (std::size_t t = 0; t < T; ++t) {
    const auto& [no, text] = lines[t + 1];
    auto cells = split_line(text);
    if (cells.size() != n + 1) {
      fail(path, no, 1,
           "expected " + std::to_string(n + 1) + " cells, got " +
               std::to_string(cells.size()));
    }
    out.timestamps.push_back(trim(cells[0]));
    for (std::size_t i = 0; i < n; ++i) {
      const std::string cell = trim(cells[i + 1]);
      if (cell.empty()) continue;  // unobserved
      out.panel.values.at(i, t) = parse_double(cell, path, no, i + 2);
      out.panel.obs_mask[i * T + t] = 1;
    }
  }
  return out;
}

void write_panel_csv(const std::string& path, const TimeSeriesPanel& panel,
                     const std::vector<std::string>& ids,
                     const std::vector<std::string>& timestamps,
                     const std::string& header_comment) {
  const std::size_t n = panel.nodes(), T = panel.steps();
  if (ids.size() != n || timestamps.size() != T) {
    throw std::invalid_argument("write_panel_csv: label sizes mismatch");
  }
  std::ofstream outf(path);
  if (!outf) throw DataError(path + ": cannot open for writing");
  if (!header_comment.empty()) outf << "# " << header_comment << "\n";
  outf << "timestamp";
  for (const auto& id : ids) outf << "," << id;
  outf << "\n";
  for (std::size_t t = 0; t < T; ++t) {
    outf << timestamps[t];
    for (std::size_t i = 0; i < n; ++i) {
      outf << ",";
      if (panel.observed(i, t)) outf << format_double(panel.values.at(i, t));
    }
    outf << "\n";
  }
}

void write_sensor_coords_csv(const std::string& path, const SensorSet& s,
                             Metric metric, const std::string& header_comment) {
  if (s.coords.empty()) {
    throw std::invalid_argument("write_sensor_coords_csv: sensor set has no coords");
  }
  std::ofstream outf(path);
  if (!outf) throw DataError(path + ": cannot open for writing");
  if (!header_comment.empty()) outf << "# " << header_comment << "\n";
  outf << (metric == Metric::Euclidean ? "id,x,y" : "id,lat,lon") << "\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    outf << s.ids[i] << "," << format_double(s.coords[i][0]) << ","
         << format_double(s.coords[i][1]) << "\n";
  }
}

void write_matrix_csv(const std::string& path, const Array& m,
                      const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels,
                      const std::string& corner,
                      const std::string& header_comment) {
  std::ofstream outf(path);
  if (!outf) throw DataError(path + ": cannot open for writing");
  if (!header_comment.empty()) outf << "# " << header_comment << "\n";
  outf << corner;
  for (const auto& c : col_labels) outf << "," << c;
  outf << "\n";
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    outf << row_labels[r];
    for (std::size_t c = 0; c < m.dim(1); ++c) {
      outf << "," << format_double(m.at(r, c));
    }
    outf << "\n";
  }
}

void write_table_csv(const std::string& path,
                     const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows,
                     const std::string& header_comment) {
  std::ofstream outf(path);
  if (!outf) throw DataError(path + ": cannot open for writing");
  if (!header_comment.empty()) outf << "# " << header_comment << "\n";
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) outf << ",";
    outf << header[c];
  }
  outf << "\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) outf << ",";
      outf << row[c];
    }
    outf << "\n";
  }
}

}  // namespace satcn
