#include "rdom/sweeps.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <set>

#include "rdom/model.hpp"
#include "rdom/scattering.hpp"
#include "rdom/spectra.hpp"

namespace rdom {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

/// Sweepable parameters; NaN means "not set".
struct Values {
  double omega = 0;
  double kappa_i = 1;
  double kappa_e = nan;
  double G = 10;
  double J = nan;
  double j_over_g = nan;
  double theta = nan;
  double theta_over_halfpi = nan;
  double delta = 0;
  double gamma = nan;
  double gamma_over_g = nan;
  double kappa = nan;
  double kappa_over_j = nan;
};

using Member = double Values::*;

const std::map<std::string, Member>& members() {
  static const std::map<std::string, Member> m{
      {"omega", &Values::omega},
      {"kappa_i", &Values::kappa_i},
      {"kappa_e", &Values::kappa_e},
      {"G", &Values::G},
      {"J", &Values::J},
      {"j_over_g", &Values::j_over_g},
      {"theta", &Values::theta},
      {"theta_over_halfpi", &Values::theta_over_halfpi},
      {"delta", &Values::delta},
      {"gamma", &Values::gamma},
      {"gamma_over_g", &Values::gamma_over_g},
      {"kappa", &Values::kappa},
      {"kappa_over_j", &Values::kappa_over_j},
  };
  return m;
}

double resolved_J(const Values& v) {
  if (!std::isnan(v.j_over_g)) return v.j_over_g * v.G;
  return std::isnan(v.J) ? 0.0 : v.J;
}

double resolved_theta(const Values& v) {
  if (!std::isnan(v.theta_over_halfpi)) return v.theta_over_halfpi * half_pi<double>;
  return std::isnan(v.theta) ? 0.0 : v.theta;
}

EffectiveParams<double> effective_of(const Values& v) {
  const double J = resolved_J(v);
  const double theta = resolved_theta(v);
  if (std::isnan(v.kappa_e)) return EffectiveParams<double>::critical(v.G, J, theta, v.kappa_i, v.omega);
  EffectiveParams<double> p{v.omega, v.kappa_i, v.kappa_e, v.G, J, theta};
  p.validate();
  return p;
}

double resolved_gamma(const Values& v) {
  if (!std::isnan(v.gamma_over_g)) return v.gamma_over_g * v.G;
  if (!std::isnan(v.gamma)) return v.gamma;
  return figure_defaults::gamma_over_g_fig2b * v.G;
}

RingParams<double> ring_of(const Values& v) {
  RingParams<double> p;
  p.omega = v.omega;
  p.G = v.G;
  p.J = resolved_J(v);
  p.theta = resolved_theta(v);
  if (!std::isnan(v.kappa_over_j)) {
    p.kappa = v.kappa_over_j * p.J;
  } else if (!std::isnan(v.kappa)) {
    p.kappa = v.kappa;
  } else {
    p.kappa = 2.0 * (p.J + v.kappa_i);
  }
  p.validate();
  return p;
}

const std::vector<std::string> effective_params{"omega", "kappa_i", "kappa_e", "G", "J",
                                                "j_over_g", "theta", "theta_over_halfpi", "delta"};
const std::vector<std::string> full_params{"omega", "kappa_i", "kappa_e", "G", "J", "j_over_g",
                                           "theta", "theta_over_halfpi", "delta", "gamma",
                                           "gamma_over_g"};
const std::vector<std::string> ring_params{"omega", "kappa_i", "kappa", "kappa_over_j", "G", "J",
                                           "j_over_g", "theta", "theta_over_halfpi", "delta"};

const std::vector<std::string> effective_outputs{
    "kappa", "lambda_plus_re", "lambda_plus_im", "lambda_minus_re", "lambda_minus_im",
    "eigengap", "s21_re", "s21_im", "s21_abs", "s41_re", "s41_im", "s41_abs",
    "s14_re", "s14_im", "s14_abs", "s23_abs", "alpha", "D"};
const std::vector<std::string> full_outputs{
    "eig0_re", "eig0_im", "eig1_re", "eig1_im", "eig2_re", "eig2_im",
    "s21_abs", "s41_abs", "s14_abs", "D", "reversed_dissipation"};
const std::vector<std::string> ring_outputs{
    "kappa", "circ0_re", "circ0_im", "circ1_re", "circ1_im", "circ2_re", "circ2_im",
    "published0_re", "published0_im", "published1_re", "published1_im",
    "published2_re", "published2_im",
    "gap0", "gap1", "gap2", "s21_abs", "s32_abs", "s13_abs", "s12_abs", "s23_abs", "s31_abs",
    "s11_abs", "s11_general_abs", "lambda_det_re", "lambda_det_im", "pole", "normality"};

std::vector<double> evaluate_effective(const Values& v) {
  const auto p = effective_of(v);
  const auto eig = eig2_closed(p);
  const auto s21 = s21_closed(p, v.delta);
  const auto s41 = s41_closed(p, v.delta);
  const auto s14 = s14_closed(p, v.delta);
  const auto chi = chirality(p, v.delta);
  return {p.kappa(),
          eig.eigenvalues[0].real(), eig.eigenvalues[0].imag(),
          eig.eigenvalues[1].real(), eig.eigenvalues[1].imag(),
          eigengap(p),
          s21.real(), s21.imag(), std::abs(s21),
          s41.real(), s41.imag(), std::abs(s41),
          s14.real(), s14.imag(), std::abs(s14),
          std::abs(s23_mirror(p, v.delta)),
          chi.alpha.value_or(nan),
          std::abs(s14) - std::abs(s41)};
}

std::vector<double> evaluate_full(const Values& v) {
  const auto e = effective_of(v);
  const auto f = lift(e, resolved_gamma(v));
  const auto cm = build_full_matrix(f, full_port_rate(e));
  const auto eig = eig_numeric(cm);
  const auto ports = four_port(s_general(cm, probe_frequency(f.delta_a, v.delta)));
  return {eig.eigenvalues[0].real(), eig.eigenvalues[0].imag(),
          eig.eigenvalues[1].real(), eig.eigenvalues[1].imag(),
          eig.eigenvalues[2].real(), eig.eigenvalues[2].imag(),
          std::abs(ports.s21), std::abs(ports.s41), std::abs(ports.s14),
          std::abs(ports.s14) - std::abs(ports.s41),
          f.reversed_dissipation() ? 1.0 : 0.0};
}

std::vector<double> evaluate_ring(const Values& v) {
  const auto p = ring_of(v);
  const auto d = ring_discrepancy(p);
  std::vector<double> out{p.kappa};
  for (const auto& z : d.circulant.eigenvalues) {
    out.push_back(z.real());
    out.push_back(z.imag());
  }
  for (const auto& z : d.as_published.eigenvalues) {
    out.push_back(z.real());
    out.push_back(z.imag());
  }
  for (double g : d.branch_gap) out.push_back(g);
  const double s11_general =
      std::abs(s_general(build_ring_matrix(p), probe_frequency(p.omega, v.delta)).s(0, 0));
  try {
    const auto rs = ring_s_closed(p, v.delta);
    for (auto [to, from] : std::array<std::pair<int, int>, 7>{
             {{2, 1}, {3, 2}, {1, 3}, {1, 2}, {2, 3}, {3, 1}, {1, 1}}})
      out.push_back(std::abs(rs.s.at(to, from)));
    out.push_back(s11_general);
    out.push_back(rs.aux.lambda_det.real());
    out.push_back(rs.aux.lambda_det.imag());
    out.push_back(0.0);
  } catch (const NumericalError&) {
    for (int k = 0; k < 7; ++k) out.push_back(nan);
    out.push_back(s11_general);
    out.push_back(nan);
    out.push_back(nan);
    out.push_back(1.0);
  }
  out.push_back(d.normality);
  return out;
}

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::effective: return "effective";
    case Family::full: return "full";
    case Family::ring: return "ring";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "effective") return Family::effective;
  if (name == "full") return Family::full;
  if (name == "ring") return Family::ring;
  throw ValidationError("unknown model family '" + std::string(name) +
                        "' (expected effective, full or ring)");
}

const std::vector<std::string>& parameter_names(Family f) {
  switch (f) {
    case Family::effective: return effective_params;
    case Family::full: return full_params;
    case Family::ring: break;
  }
  return ring_params;
}

const std::vector<std::string>& output_names(Family f) {
  switch (f) {
    case Family::effective: return effective_outputs;
    case Family::full: return full_outputs;
    case Family::ring: break;
  }
  return ring_outputs;
}

void validate_parameters(Family family, const std::vector<std::string>& names) {
  const auto& known = parameter_names(family);
  std::set<std::string> seen;
  for (const auto& name : names) {
    if (std::find(known.begin(), known.end(), name) == known.end())
      throw ValidationError("unknown parameter '" + name + "' for family " + to_string(family));
    if (!seen.insert(name).second)
      throw ValidationError("parameter '" + name + "' given twice");
  }
  const auto exclusive = [&](const char* a, const char* b) {
    if (seen.count(a) && seen.count(b))
      throw ValidationError(std::string("parameters '") + a + "' and '" + b +
                            "' are mutually exclusive");
  };
  exclusive("J", "j_over_g");
  exclusive("theta", "theta_over_halfpi");
  exclusive("gamma", "gamma_over_g");
  exclusive("kappa", "kappa_over_j");
}

namespace {
Values values_from(Family family, const ParameterMap& params) {
  std::vector<std::string> names;
  for (const auto& [name, value] : params) {
    names.push_back(name);
    if (!std::isfinite(value)) throw ValidationError("parameter '" + name + "' is not finite");
  }
  validate_parameters(family, names);
  Values v;
  for (const auto& [name, value] : params) v.*members().at(name) = value;
  return v;
}
}  // namespace

EffectiveParams<double> effective_from(const ParameterMap& params) {
  return effective_of(values_from(Family::effective, params));
}

FullParams<double> full_from(const ParameterMap& params) {
  const Values v = values_from(Family::full, params);
  return lift(effective_of(v), resolved_gamma(v));
}

double full_port_rate_from(const ParameterMap& params) {
  return full_port_rate(effective_of(values_from(Family::full, params)));
}

RingParams<double> ring_from(const ParameterMap& params) {
  return ring_of(values_from(Family::ring, params));
}

void SweepSpec::validate() const {
  std::vector<std::string> names;
  for (const auto& axis : axes) {
    names.push_back(axis.name);
    detail::require_increasing(axis.values, axis.name.c_str());
  }
  for (const auto& [name, value] : fixed) {
    names.push_back(name);
    if (!std::isfinite(value)) throw ValidationError("parameter '" + name + "' is not finite");
  }
  validate_parameters(family, names);

  if (outputs.empty()) throw ValidationError("sweep requests no outputs");
  const auto& outs = output_names(family);
  for (const auto& o : outputs) {
    if (std::find(outs.begin(), outs.end(), o) == outs.end())
      throw ValidationError("unknown output '" + o + "' for family " + to_string(family));
  }
}

nlohmann::json SweepSpec::to_json() const {
  nlohmann::json j;
  j["family"] = to_string(family);
  j["axes"] = nlohmann::json::array();
  for (const auto& a : axes) {
    j["axes"].push_back({{"name", a.name},
                         {"points", a.values.size()},
                         {"from", a.values.front()},
                         {"to", a.values.back()}});
  }
  j["fixed"] = fixed;
  j["outputs"] = outputs;
  return j;
}

Dataset run_sweep(const SweepSpec& spec, unsigned threads) {
  spec.validate();
  std::size_t rows = 1;
  for (const auto& a : spec.axes) rows *= a.values.size();

  const auto& all_outputs = output_names(spec.family);
  std::vector<std::size_t> picks;
  for (const auto& o : spec.outputs)
    picks.push_back(static_cast<std::size_t>(
        std::find(all_outputs.begin(), all_outputs.end(), o) - all_outputs.begin()));

  Values base;
  for (const auto& [name, value] : spec.fixed) base.*members().at(name) = value;
  std::vector<Member> axis_members;
  for (const auto& a : spec.axes) axis_members.push_back(members().at(a.name));

  // Validate the first row's parameters before committing to the whole grid.
  const auto row_values = [&](std::size_t row) {
    Values v = base;
    std::size_t rem = row;
    for (std::size_t k = spec.axes.size(); k-- > 0;) {
      const auto& vals = spec.axes[k].values;
      v.*axis_members[k] = vals[rem % vals.size()];
      rem /= vals.size();
    }
    return v;
  };
  const auto evaluate = [&](const Values& v) {
    switch (spec.family) {
      case Family::effective: return evaluate_effective(v);
      case Family::full: return evaluate_full(v);
      case Family::ring: break;
    }
    return evaluate_ring(v);
  };
  evaluate(row_values(0));

  std::vector<std::vector<double>> results(rows);
  parallel_for(rows, threads, [&](std::size_t row) {
    const auto all = evaluate(row_values(row));
    std::vector<double> picked(picks.size());
    for (std::size_t k = 0; k < picks.size(); ++k) picked[k] = all[picks[k]];
    results[row] = std::move(picked);
  });

  Dataset ds;
  for (std::size_t k = 0; k < spec.axes.size(); ++k) {
    std::vector<double> col(rows);
    for (std::size_t r = 0; r < rows; ++r) col[r] = row_values(r).*axis_members[k];
    ds.add_column(spec.axes[k].name, std::move(col));
  }
  for (std::size_t k = 0; k < picks.size(); ++k) {
    std::vector<double> col(rows);
    for (std::size_t r = 0; r < rows; ++r) col[r] = results[r][k];
    ds.add_column(spec.outputs[k], std::move(col));
  }
  ds.provenance = {{"generator", "rdom"}, {"version", version()}, {"sweep", spec.to_json()}};
  return ds;
}

}  // namespace rdom
