#include "mcgp/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mcgp/errors.hpp"
#include "mcgp/random.hpp"

namespace mcgp {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::size_t CsvTable::column_index(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (line_no == 0 || trim(line).empty()) throw DataError(path.string() + ": empty file");
  t.header = split_line(line);
  for (const auto& h : t.header) {
    if (h.empty()) throw DataError(path.string() + ": empty column name in header");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(t.header.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const std::string& c = cells[j];
      const char* first = c.data();
      const char* last = c.data() + c.size();
      if (!c.empty() && c[0] == '+') ++first;
      const auto res = std::from_chars(first, last, row[j]);
      if (c.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(row[j])) {
        throw DataError(path.string() + ": line " + std::to_string(line_no) + ", column '" +
                        t.header[j] + "': cannot parse '" + c + "' as a number");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << format_double(r[j]);
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

Dataset ingest_csv(const std::filesystem::path& path, const std::vector<std::string>& a_columns,
                   const std::vector<std::string>& ac_columns, const MarginalConstraint& constraint) {
  if (a_columns.empty() || ac_columns.empty()) {
    throw ConfigError("need at least one constrained and one free column");
  }
  const CsvTable t = read_csv(path);
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ic;
  for (const auto& c : a_columns) ia.push_back(t.column_index(c));
  for (const auto& c : ac_columns) ic.push_back(t.column_index(c));
  Dataset d;
  d.a_names = a_columns;
  d.ac_names = ac_columns;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    Point p;
    p.xa.resize(static_cast<Eigen::Index>(ia.size()));
    p.xac.resize(static_cast<Eigen::Index>(ic.size()));
    for (std::size_t j = 0; j < ia.size(); ++j) p.xa[static_cast<Eigen::Index>(j)] = t.rows[r][ia[j]];
    for (std::size_t j = 0; j < ic.size(); ++j) p.xac[static_cast<Eigen::Index>(j)] = t.rows[r][ic[j]];
    if (!in_support(constraint, p.xa)) {
      throw DataError(path.string() + ": data row " + std::to_string(r + 1) +
                      " has a constrained value outside the " + family_name(constraint.family) +
                      " support");
    }
    d.rows.push_back(std::move(p));
  }
  if (d.rows.empty()) throw DataError(path.string() + ": no data rows");
  return d;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::vector<std::string> header = data.a_names;
  header.insert(header.end(), data.ac_names.begin(), data.ac_names.end());
  std::vector<std::vector<double>> rows;
  rows.reserve(data.rows.size());
  for (const auto& p : data.rows) {
    std::vector<double> r(p.xa.data(), p.xa.data() + p.xa.size());
    r.insert(r.end(), p.xac.data(), p.xac.data() + p.xac.size());
    rows.push_back(std::move(r));
  }
  write_csv(path, header, rows);
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, std::size_t train_n,
                                          std::size_t test_n, std::uint64_t seed) {
  if (train_n + test_n > data.size()) {
    throw ConfigError("split sizes " + std::to_string(train_n) + " + " + std::to_string(test_n) +
                      " exceed the " + std::to_string(data.size()) + " available rows");
  }
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  RandomStream rng = RandomStream(seed).derive("split");
  // Fisher-Yates with our own stream so the split does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
  }
  Dataset train;
  Dataset test;
  train.a_names = test.a_names = data.a_names;
  train.ac_names = test.ac_names = data.ac_names;
  for (std::size_t k = 0; k < train_n; ++k) train.rows.push_back(data.rows[idx[k]]);
  for (std::size_t k = 0; k < test_n; ++k) test.rows.push_back(data.rows[idx[train_n + k]]);
  return {std::move(train), std::move(test)};
}

}  // namespace mcgp
