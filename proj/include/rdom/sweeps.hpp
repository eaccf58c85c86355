#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <map>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "rdom/dataset.hpp"
#include "rdom/model.hpp"

namespace rdom {

enum class Family { effective, full, ring };

std::string to_string(Family f);
Family parse_family(std::string_view name);

struct Axis {
  std::string name;
  std::vector<double> values;
};

/// Cartesian-product sweep of one model family. Axes vary fastest last
/// (row-major); `fixed` overrides defaults; every requested output becomes
/// one column after the axis columns.
struct SweepSpec {
  Family family = Family::effective;
  std::vector<Axis> axes;
  std::map<std::string, double> fixed;
  std::vector<std::string> outputs;

  void validate() const;
  nlohmann::json to_json() const;
};

/// Parameter names accepted on axes and in `fixed` for a family.
const std::vector<std::string>& parameter_names(Family f);
/// Output column names available for a family.
const std::vector<std::string>& output_names(Family f);

Dataset run_sweep(const SweepSpec& spec, unsigned threads = 0);

using ParameterMap = std::map<std::string, double>;

/// Rejects unknown, repeated, or mutually exclusive parameter names
/// (J/j_over_g, theta/theta_over_halfpi, gamma/gamma_over_g, kappa/kappa_over_j).
void validate_parameters(Family family, const std::vector<std::string>& names);

// Parameter maps to model types. Unset values default to G = 10, kappa_i = 1,
// J = 0, theta = 0, critical coupling, gamma = 50 G, and for the ring
// kappa = 2 (J + kappa_i).
EffectiveParams<double> effective_from(const ParameterMap& params);
FullParams<double> full_from(const ParameterMap& params);
double full_port_rate_from(const ParameterMap& params);
RingParams<double> ring_from(const ParameterMap& params);

/// Runs body(i) for i in [0, n) on up to `threads` workers (0: all cores).
/// Each index is visited exactly once; callers write results by index. The
/// first exception thrown by any worker is rethrown after all have joined.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(threads, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([lo, hi, &body, &failure, &failure_mutex] {
        try {
          for (std::size_t i = lo; i < hi; ++i) body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Figure datasets

enum class FigureId { fig2a, fig2b, fig3a, fig3b, fig4a, fig4b, fig5, fig6b, fig8a, fig8b, fig9 };

const std::vector<FigureId>& all_figures();
std::string to_string(FigureId id);
/// Throws ValidationError listing the valid ids.
FigureId parse_figure(std::string_view name);

Dataset figure_dataset(FigureId id, unsigned threads = 0);

/// Defaults shared by the figure generators.
namespace figure_defaults {
inline constexpr double G = 10.0;  // G / kappa_i
inline constexpr double kappa_i = 1.0;
inline constexpr double gamma_over_g_fig2b = 50.0;
inline constexpr double kappa_over_j_fig9 = 100.0;
inline constexpr std::size_t axis_points = 401;
inline constexpr std::size_t surface_points = 201;
inline constexpr std::size_t bandwidth_points = 2001;
inline const std::vector<double> fig5_gamma_over_g{0.1, 0.5, 1.0, 5.0, 10.0, 50.0};
}  // namespace figure_defaults

}  // namespace rdom
