#include "dshell/io.hpp"

#include <charconv>
#include <cmath>
#include <algorithm>
#include <sstream>

namespace dshell
{

std::string format_number(double x)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

nlohmann::json grid_json(const ParamGrid& grid)
{
  return {{"t1", {grid.t1_range().lo, grid.t1_range().hi}},
          {"t2", {grid.t2_range().lo, grid.t2_range().hi}},
          {"n1", grid.n1()},
          {"n2", grid.n2()},
          {"h1", grid.h1()},
          {"h2", grid.h2()},
          {"order", "i fastest"}};
}

std::vector<std::string> component_names(const std::string& name, const std::vector<int>& dims)
{
  if (dims.empty()) return {name};
  std::vector<std::string> out;
  std::vector<int> idx(dims.size(), 0);
  for (;;)
  {
    std::string n = name + '_';
    for (int v : idx) n += std::to_string(v + 1);
    out.push_back(std::move(n));
    int p = static_cast<int>(dims.size()) - 1;
    while (p >= 0 && ++idx[p] == dims[p]) idx[p--] = 0;
    if (p < 0) break;
  }
  return out;
}

namespace detail
{

void write_csv_header(std::ostream& os, const std::string& name, const std::vector<int>& dims)
{
  os << "i,j,t1,t2";
  for (const auto& n : component_names(name, dims)) os << ',' << n;
  os << '\n';
}

void write_csv_prefix(std::ostream& os, const ParamGrid& grid, std::size_t node)
{
  const int i = static_cast<int>(node % grid.n1());
  const int j = static_cast<int>(node / grid.n1());
  os << i << ',' << j << ',' << format_number(grid.theta1(i)) << ',' << format_number(grid.theta2(j));
}

void check_csv_grid(const CsvData& csv, const ParamGrid& grid)
{
  if (csv.rows.size() != grid.node_count())
    throw Error("csv: expected " + std::to_string(grid.node_count()) + " rows for the configured grid, got " +
                std::to_string(csv.rows.size()));
  const auto i = csv.column("i"), j = csv.column("j"), t1 = csv.column("t1"), t2 = csv.column("t2");
  for (std::size_t k = 0; k < grid.node_count(); ++k)
  {
    const int gi = static_cast<int>(k % grid.n1()), gj = static_cast<int>(k / grid.n1());
    const double tol = 1e-12 * (1.0 + std::abs(grid.theta1(gi)) + std::abs(grid.theta2(gj)));
    if (i[k] != gi || j[k] != gj || std::abs(t1[k] - grid.theta1(gi)) > tol || std::abs(t2[k] - grid.theta2(gj)) > tol)
      throw Error("csv: row " + std::to_string(k + 2) + " does not match " + describe_node(grid, k));
  }
}

} // namespace detail

void CsvTable::write(std::ostream& os) const
{
  os << "i,j,t1,t2";
  for (const auto& c : columns_) os << ',' << c.name;
  os << '\n';
  for (std::size_t k = 0; k < grid_.node_count(); ++k)
  {
    detail::write_csv_prefix(os, grid_, k);
    for (const auto& c : columns_) os << ',' << format_number(c.value(k));
    os << '\n';
  }
}

nlohmann::json CsvTable::manifest(const std::string& file) const
{
  return {{"file", file}, {"grid", grid_json(grid_)}, {"fields", blocks_}};
}

std::vector<double> CsvData::column(const std::string& name) const
{
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == name)
    {
      std::vector<double> out(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) out[r] = rows[r][c];
      return out;
    }
  throw Error("csv: missing column '" + name + "'");
}

bool CsvData::has(const std::string& name) const
{
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

CsvData read_csv(std::istream& is)
{
  CsvData out;
  std::string line;
  if (!std::getline(is, line)) throw Error("csv: empty input");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.header.push_back(cell);
  }
  int lineno = 1;
  while (std::getline(is, line))
  {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end)
    {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      const auto res = std::from_chars(p, comma, v);
      if (res.ec != std::errc() || res.ptr != comma)
        throw Error("csv: line " + std::to_string(lineno) + ": bad number '" + std::string(p, comma) + "'");
      row.push_back(v);
      p = comma + 1;
    }
    if (row.size() != out.header.size())
      throw Error("csv: line " + std::to_string(lineno) + " has " + std::to_string(row.size()) + " cells, header has " +
                  std::to_string(out.header.size()));
    out.rows.push_back(std::move(row));
  }
  return out;
}

} // namespace dshell
