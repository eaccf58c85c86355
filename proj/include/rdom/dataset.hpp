#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace rdom {

struct Column {
  std::string name;
  std::vector<double> values;
};

/// Named numeric columns of equal length plus the provenance record that
/// produced them.
class Dataset {
 public:
  void add_column(std::string name, std::vector<double> values);

  bool has_column(std::string_view name) const;
  const Column& column(std::string_view name) const;
  const std::vector<Column>& columns() const { return columns_; }
  std::size_t rows() const { return columns_.empty() ? 0 : columns_.front().values.size(); }

  void write_csv(std::ostream& os) const;
  std::string to_csv() const;

  /// Writes <stem>.csv and <stem>.meta.json into dir.
  void write(const std::filesystem::path& dir, const std::string& stem) const;

  nlohmann::json provenance;

 private:
  std::vector<Column> columns_;
};

/// Shortest text that round-trips a double (17 significant digits at most).
std::string format_double(double value);

}  // namespace rdom
