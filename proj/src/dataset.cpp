#include "rdom/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rdom/core.hpp"

namespace rdom {

void Dataset::add_column(std::string name, std::vector<double> values) {
  if (has_column(name)) throw ValidationError("duplicate column '" + name + "'");
  if (!columns_.empty() && values.size() != rows())
    throw ValidationError("column '" + name + "' has " + std::to_string(values.size()) +
                          " rows, expected " + std::to_string(rows()));
  columns_.push_back({std::move(name), std::move(values)});
}

bool Dataset::has_column(std::string_view name) const {
  for (const auto& c : columns_)
    if (c.name == name) return true;
  return false;
}

const Column& Dataset::column(std::string_view name) const {
  for (const auto& c : columns_)
    if (c.name == name) return c;
  throw ValidationError("no column '" + std::string(name) + "'");
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void Dataset::write_csv(std::ostream& os) const {
  for (std::size_t c = 0; c < columns_.size(); ++c) os << (c ? "," : "") << columns_[c].name;
  os << '\n';
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < columns_.size(); ++c)
      os << (c ? "," : "") << format_double(columns_[c].values[r]);
    os << '\n';
  }
}

std::string Dataset::to_csv() const {
  std::ostringstream os;
  write_csv(os);
  return os.str();
}

void Dataset::write(const std::filesystem::path& dir, const std::string& stem) const {
  if (provenance.is_null() || provenance.empty())
    throw ValidationError("dataset '" + stem + "' has no provenance");
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / (stem + ".csv"));
    if (!csv) throw std::runtime_error("cannot write " + (dir / (stem + ".csv")).string());
    write_csv(csv);
  }
  std::ofstream meta(dir / (stem + ".meta.json"));
  if (!meta) throw std::runtime_error("cannot write " + (dir / (stem + ".meta.json")).string());
  meta << provenance.dump(2) << '\n';
}

}  // namespace rdom
