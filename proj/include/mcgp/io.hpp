#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mcgp/constraints.hpp"
#include "mcgp/data.hpp"

namespace mcgp {

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws DataError when missing.
  [[nodiscard]] std::size_t column_index(const std::string& name) const;
};

/// Numeric CSV with a header row. Errors name the line and column.
CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// Reads the named columns into (x_A, x_{A^c}) points. Rows whose constrained
/// values fall outside the family's support are rejected with their row number.
Dataset ingest_csv(const std::filesystem::path& path, const std::vector<std::string>& a_columns,
                   const std::vector<std::string>& ac_columns, const MarginalConstraint& constraint);

void write_dataset(const std::filesystem::path& path, const Dataset& data);

/// Disjoint uniformly random (train, test) split, deterministic in the seed.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, std::size_t train_n,
                                          std::size_t test_n, std::uint64_t seed);

}  // namespace mcgp
