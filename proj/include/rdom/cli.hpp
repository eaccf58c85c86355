#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rdom/model.hpp"
#include "rdom/sweeps.hpp"

namespace rdom::cli {

inline constexpr const char* out_dir_env = "RDOM_OUT_DIR";

enum ExitCode : int { ok = 0, validation_error = 1, numerical_error = 2 };

/// A full three-mode model given by its raw couplings rather than (J, theta).
struct ExplicitFull {
  FullParams<double> params;
  double port_rate = 0;
};

struct Config {
  Family family = Family::effective;
  ParameterMap params;
  std::optional<ExplicitFull> explicit_full;
  std::vector<Axis> axes;
  std::vector<std::string> outputs;
  std::optional<std::string> out_dir;
  std::string format = "csv";
};

/// Parses the YAML config. Unknown or malformed keys raise ValidationError
/// naming the full key path (e.g. "model.effective.Jx").
Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);

/// Runs the command line; returns an ExitCode. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace rdom::cli
