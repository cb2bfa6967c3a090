#include "lamperti/field_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace lamperti::fields {

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, sep)) parts.push_back(item);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

}  // namespace

std::string encode_grid_axes(const LatticeGrid& grid) {
  std::string out;
  for (std::size_t k = 0; k < grid.axes.size(); ++k) {
    if (k) out += ';';
    for (std::size_t i = 0; i < grid.axes[k].size(); ++i) {
      if (i) out += ',';
      out += format_double(grid.axes[k][i]);
    }
  }
  return out;
}

LatticeGrid decode_grid_axes(const std::string& text) {
  std::vector<std::vector<double>> axes;
  for (const auto& axis : split(text, ';')) {
    std::vector<double> coords;
    for (const auto& c : split(axis, ',')) coords.push_back(parse_double(c));
    axes.push_back(std::move(coords));
  }
  return LatticeGrid(std::move(axes));
}

void write_field_sample(std::ostream& out, const FieldSample& sample) {
  sample.validate();
  Metadata md = sample.metadata;
  md.set("dimension", std::to_string(sample.dimension()));
  md.set("components", std::to_string(sample.components));
  md.set("n_reps", std::to_string(sample.n_reps));
  if (sample.grid) md.set("grid_axes", encode_grid_axes(*sample.grid));
  for (const auto& [k, v] : md.entries()) out << "# " << k << '=' << v << '\n';

  std::string line = "rep";
  for (std::size_t i = 1; i <= sample.dimension(); ++i) line += ",c_" + std::to_string(i);
  for (std::size_t c = 1; c <= sample.components; ++c) line += ",v_" + std::to_string(c);
  out << line << '\n';

  for (std::size_t r = 0; r < sample.n_reps; ++r) {
    const std::string rep = std::to_string(r);
    for (std::size_t p = 0; p < sample.n_points(); ++p) {
      line = rep;
      const Vec& pt = sample.points[p];
      for (Eigen::Index i = 0; i < pt.size(); ++i) {
        line += ',';
        line += format_double(pt[i]);
      }
      for (std::size_t c = 0; c < sample.components; ++c) {
        line += ',';
        line += format_double(sample.at(r, p, c));
      }
      line += '\n';
      out << line;
    }
  }
}

FieldSample read_field_sample(std::istream& in) {
  FieldSample sample;
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      if (!body.empty() && body[0] == ' ') body.erase(0, 1);
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw ParameterError("malformed metadata line: " + line);
      sample.metadata.set(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    if (line.rfind("rep", 0) == 0) continue;
    std::vector<double> row;
    for (const auto& cell : split(line, ',')) row.push_back(parse_double(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParameterError("field sample file has no data rows");

  const std::size_t width = rows.front().size();
  std::size_t m = 1;
  if (auto c = sample.metadata.get("components")) m = std::stoul(*c);
  if (width < m + 2) throw ParameterError("field sample rows are too short");
  const std::size_t d = width - 1 - m;
  if (auto dm = sample.metadata.get("dimension"); dm && std::stoul(*dm) != d) {
    throw ParameterError("row width disagrees with the dimension metadata");
  }

  for (const auto& row : rows) {
    if (row.size() != width) throw ParameterError("field sample rows have inconsistent widths");
    if (row[0] != 0.0) break;
    sample.points.emplace_back(Eigen::Map<const Vec>(row.data() + 1, static_cast<Eigen::Index>(d)));
  }
  const std::size_t np = sample.points.size();
  if (rows.size() % np != 0) throw ParameterError("rows are not a whole number of replicates");
  sample.n_reps = rows.size() / np;
  sample.components = m;
  sample.values.resize(rows.size() * m);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const std::size_t rep = i / np;
    const std::size_t p = i % np;
    if (row[0] != static_cast<double>(rep)) throw ParameterError("replicate index out of order in row " + std::to_string(i));
    for (std::size_t k = 0; k < d; ++k) {
      if (row[1 + k] != sample.points[p][static_cast<Eigen::Index>(k)]) {
        throw ParameterError("replicates disagree on point coordinates");
      }
    }
    for (std::size_t c = 0; c < m; ++c) sample.at(rep, p, c) = row[1 + d + c];
  }
  if (auto axes = sample.metadata.get("grid_axes")) sample.grid = decode_grid_axes(*axes);
  sample.validate();
  return sample;
}

void write_text_atomically(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::cout << content;
    std::cout.flush();
    return;
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ParameterError("cannot open '" + tmp + "' for writing");
    f << content;
    if (!f) throw ParameterError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw ParameterError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

}  // namespace lamperti::fields
