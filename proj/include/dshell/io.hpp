#pragma once

/// \file io.hpp
/// CSV and JSON-manifest serialization of fields.

#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dshell/field.hpp"

namespace dshell
{

/// Shortest round-trip decimal representation of x.
std::string format_number(double x);

/// Grid metadata as JSON.
nlohmann::json grid_json(const ParamGrid& grid);

/// Column names of a component block: `name` for scalars, otherwise `name_` followed by
/// 1-based indices in lexicographic order.
std::vector<std::string> component_names(const std::string& name, const std::vector<int>& dims);

namespace detail
{
void write_csv_header(std::ostream& os, const std::string& name, const std::vector<int>& dims);
void write_csv_prefix(std::ostream& os, const ParamGrid& grid, std::size_t node);
} // namespace detail

/// One row per node: i, j, t1, t2, then components in lexicographic index order.
/// Column names use 1-based indices, e.g. `E_12`.
template <class T>
void write_csv(std::ostream& os, const Field<T>& f, const std::string& name)
{
  using VT = ValueTraits<T>;
  detail::write_csv_header(os, name, VT::dims());
  const ParamGrid& g = f.grid();
  for (std::size_t k = 0; k < g.node_count(); ++k)
  {
    detail::write_csv_prefix(os, g, k);
    for (int c = 0; c < VT::size; ++c) os << ',' << format_number(VT::get(f[k], c));
    os << '\n';
  }
}

/// Manifest entry describing the layout of a serialized field.
template <class T>
nlohmann::json manifest(const Field<T>& f, const std::string& name, const std::string& file)
{
  const auto dims = ValueTraits<T>::dims();
  return {{"name", name}, {"file", file}, {"rank", dims.size()}, {"dims", dims}, {"grid", grid_json(f.grid())}};
}

/// Several fields on one grid written as a single CSV with the i, j, t1, t2 prefix.
class CsvTable
{
public:
  explicit CsvTable(const ParamGrid& grid) : grid_(grid) {}

  template <class T>
  CsvTable& add(const Field<T>& f, const std::string& name)
  {
    if (!(f.grid() == grid_)) throw Error("CsvTable: field '" + name + "' lives on a different grid");
    using VT = ValueTraits<T>;
    const auto names = component_names(name, VT::dims());
    for (int c = 0; c < VT::size; ++c)
      columns_.push_back({names[static_cast<std::size_t>(c)], [f, c](std::size_t k) { return VT::get(f[k], c); }});
    blocks_.push_back({{"name", name}, {"rank", VT::dims().size()}, {"dims", VT::dims()}});
    return *this;
  }

  void write(std::ostream& os) const;
  /// Manifest entry: file, grid and the component blocks in column order.
  nlohmann::json manifest(const std::string& file) const;

private:
  struct Column
  {
    std::string name;
    std::function<double(std::size_t)> value;
  };
  ParamGrid grid_;
  std::vector<Column> columns_;
  std::vector<nlohmann::json> blocks_;
};

/// Parsed CSV written by write_csv or CsvTable.
struct CsvData
{
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Column by name; throws Error naming the missing column.
  std::vector<double> column(const std::string& name) const;
  bool has(const std::string& name) const;
};

CsvData read_csv(std::istream& is);

namespace detail
{
void check_csv_grid(const CsvData& csv, const ParamGrid& grid);
} // namespace detail

/// Reads the named block back into a field, checking that the i, j, t1, t2 columns match the grid.
template <class T>
Field<T> field_from_csv(const CsvData& csv, const ParamGrid& grid, const std::string& name)
{
  using VT = ValueTraits<T>;
  detail::check_csv_grid(csv, grid);
  const auto names = component_names(name, VT::dims());
  std::vector<std::vector<double>> cols;
  for (const auto& n : names) cols.push_back(csv.column(n));
  std::vector<T> values(grid.node_count(), VT::zero());
  for (std::size_t k = 0; k < grid.node_count(); ++k)
    for (int c = 0; c < VT::size; ++c) VT::set(values[k], c, cols[static_cast<std::size_t>(c)][k]);
  return Field<T>(grid, std::move(values));
}

} // namespace dshell
