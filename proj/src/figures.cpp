#include <cmath>
#include <sstream>

#include "rdom/model.hpp"
#include "rdom/scattering.hpp"
#include "rdom/spectra.hpp"
#include "rdom/sweeps.hpp"

namespace rdom {

namespace {

namespace fd = figure_defaults;

constexpr double pi = std::numbers::pi;

std::vector<double> range(double from, double to, std::size_t points) {
  return linspace(from, to, points);
}

std::vector<double> steps(double from, double step, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = from + step * static_cast<double>(i);
  return out;
}

nlohmann::json base_provenance(FigureId id) {
  return {{"generator", "rdom"},
          {"version", version()},
          {"figure", to_string(id)},
          {"units", "rates in units of kappa_i"},
          {"defaults", {{"G", fd::G}, {"kappa_i", fd::kappa_i}, {"coupling", "critical"}}}};
}

Dataset from_sweep(FigureId id, const SweepSpec& spec, unsigned threads) {
  Dataset ds = run_sweep(spec, threads);
  nlohmann::json prov = base_provenance(id);
  prov["sweep"] = ds.provenance["sweep"];
  ds.provenance = prov;
  return ds;
}

/// Writes sheet rows: one row per (theta, J/G, branch).
Dataset sheets_dataset(const std::vector<double>& thetas, const std::vector<double>& ratios,
                       const std::vector<Spectrum<double>>& raw,
                       const std::vector<Spectrum<double>>& tracked, bool mark_mechanical) {
  std::vector<double> theta, ratio, branch, re, im, raw_re, raw_im, mech;
  for (std::size_t it = 0; it < thetas.size(); ++it) {
    for (std::size_t ir = 0; ir < ratios.size(); ++ir) {
      const std::size_t idx = it * ratios.size() + ir;
      const auto& t = tracked[idx];
      const auto& r = raw[idx];
      std::size_t most_damped = 0;
      for (std::size_t k = 1; k < t.size(); ++k)
        if (t.eigenvalues[k].imag() < t.eigenvalues[most_damped].imag()) most_damped = k;
      for (std::size_t k = 0; k < t.size(); ++k) {
        theta.push_back(thetas[it]);
        ratio.push_back(ratios[ir]);
        branch.push_back(static_cast<double>(t.branch_ids[k]));
        re.push_back(t.eigenvalues[k].real());
        im.push_back(t.eigenvalues[k].imag());
        raw_re.push_back(r.eigenvalues[k].real());
        raw_im.push_back(r.eigenvalues[k].imag());
        mech.push_back(k == most_damped ? 1.0 : 0.0);
      }
    }
  }
  Dataset ds;
  ds.add_column("theta", std::move(theta));
  ds.add_column("j_over_g", std::move(ratio));
  ds.add_column("branch", std::move(branch));
  ds.add_column("re", std::move(re));
  ds.add_column("im", std::move(im));
  ds.add_column("raw_re", std::move(raw_re));
  ds.add_column("raw_im", std::move(raw_im));
  if (mark_mechanical) ds.add_column("mechanical", std::move(mech));
  return ds;
}

Dataset fig2a() {
  const auto thetas = range(0, 4 * pi, fd::surface_points);
  const auto ratios = range(0, 1.5, fd::surface_points);
  const auto grid =
      sweep_riemann(EffectiveParams<double>::critical(fd::G, 0, 0, fd::kappa_i), thetas, ratios);
  Dataset ds = sheets_dataset(thetas, ratios, grid.raw, grid.tracked, false);
  ds.provenance = base_provenance(FigureId::fig2a);
  ds.provenance["model"] = "two-mode closed form";
  return ds;
}

Dataset fig2b(unsigned threads) {
  const auto thetas = range(0, 4 * pi, fd::surface_points);
  const auto ratios = range(0, 1.5, fd::surface_points);
  const double gamma = fd::gamma_over_g_fig2b * fd::G;
  std::vector<Spectrum<double>> raw(thetas.size() * ratios.size());
  parallel_for(raw.size(), threads, [&](std::size_t idx) {
    const std::size_t it = idx / ratios.size(), ir = idx % ratios.size();
    const auto e = EffectiveParams<double>::critical(fd::G, ratios[ir] * fd::G, thetas[it], fd::kappa_i);
    raw[idx] = eig_numeric(build_full_matrix(lift(e, gamma), full_port_rate(e)));
  });
  std::vector<Spectrum<double>> tracked(raw.size());
  for (std::size_t ir = 0; ir < ratios.size(); ++ir) {
    std::vector<Spectrum<double>> column;
    for (std::size_t it = 0; it < thetas.size(); ++it) column.push_back(raw[it * ratios.size() + ir]);
    auto t = track_branches(column);
    for (std::size_t it = 0; it < thetas.size(); ++it) {
      raw[it * ratios.size() + ir] = std::move(column[it]);
      tracked[it * ratios.size() + ir] = std::move(t[it]);
    }
  }
  Dataset ds = sheets_dataset(thetas, ratios, raw, tracked, true);
  ds.provenance = base_provenance(FigureId::fig2b);
  ds.provenance["model"] = "three-mode numeric";
  ds.provenance["gamma_over_g"] = fd::gamma_over_g_fig2b;
  return ds;
}

Dataset fig3(FigureId id, double theta_over_halfpi, unsigned threads) {
  SweepSpec spec;
  spec.family = Family::effective;
  spec.axes = {{"j_over_g", steps(0.0, 0.1, 16)}, {"delta", range(-60, 60, fd::axis_points)}};
  spec.fixed = {{"G", fd::G}, {"kappa_i", fd::kappa_i}, {"theta_over_halfpi", theta_over_halfpi}};
  spec.outputs = {"s21_re", "s21_im", "s21_abs"};
  return from_sweep(id, spec, threads);
}

Dataset fig4a(unsigned threads) {
  SweepSpec spec;
  spec.family = Family::effective;
  spec.axes = {{"theta_over_halfpi", {0, 1, 2, 3}},
               {"delta", range(-110, 110, fd::axis_points)}};
  spec.fixed = {{"G", fd::G}, {"kappa_i", fd::kappa_i}, {"j_over_g", 1.0}};
  spec.outputs = {"s41_abs", "s14_abs"};
  return from_sweep(FigureId::fig4a, spec, threads);
}

Dataset fig4b(unsigned threads) {
  SweepSpec spec;
  spec.family = Family::effective;
  spec.axes = {{"theta", range(0, 4 * pi, fd::surface_points)},
               {"j_over_g", range(0, 1.5, fd::surface_points)}};
  spec.fixed = {{"G", fd::G}, {"kappa_i", fd::kappa_i}, {"delta", 0.0}};
  spec.outputs = {"s41_abs", "s14_abs"};
  return from_sweep(FigureId::fig4b, spec, threads);
}

std::string gamma_column(double gamma_over_g) {
  std::ostringstream os;
  os << "D_gamma_" << gamma_over_g << "G";
  return os.str();
}

Dataset fig5(unsigned threads) {
  const auto e = EffectiveParams<double>::critical(fd::G, fd::G, pi / 2, fd::kappa_i);
  const double span = 5 * e.kappa();
  const auto grid = ProbeGrid<double>::linspace(-span, span, fd::bandwidth_points);
  Dataset ds;
  ds.add_column("delta", grid.delta_values);
  nlohmann::json derived;

  const auto eff = nonreciprocity_curve(e, grid);
  std::vector<double> col(grid.size());
  for (std::size_t i = 0; i < col.size(); ++i) col[i] = eff.values[i].real();
  ds.add_column("D_effective", col);
  derived["effective"] = {{"fwhm", fwhm(eff)}, {"area", nonreciprocal_area(eff)}};

  const auto& gammas = fd::fig5_gamma_over_g;
  std::vector<TransmissionCurve<double>> curves(gammas.size());
  parallel_for(gammas.size(), threads, [&](std::size_t k) {
    curves[k] = nonreciprocity_curve(lift(e, gammas[k] * fd::G), grid, full_port_rate(e));
  });
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    for (std::size_t i = 0; i < col.size(); ++i) col[i] = curves[k].values[i].real();
    ds.add_column(gamma_column(gammas[k]), col);
    derived[gamma_column(gammas[k])] = {{"gamma_over_g", gammas[k]},
                                        {"fwhm", fwhm(curves[k])},
                                        {"area", nonreciprocal_area(curves[k])}};
  }
  ds.provenance = base_provenance(FigureId::fig5);
  ds.provenance["theta_over_halfpi"] = 1;
  ds.provenance["j_over_g"] = 1;
  ds.provenance["port_rate"] = full_port_rate(e);
  ds.provenance["derived"] = derived;
  return ds;
}

Dataset fig6b(unsigned threads) {
  SweepSpec spec;
  spec.family = Family::effective;
  spec.axes = {{"theta", range(0, 4 * pi, fd::axis_points)}};
  spec.fixed = {{"G", fd::G}, {"kappa_i", fd::kappa_i}, {"j_over_g", 1.0}, {"delta", 0.0}};
  spec.outputs = {"alpha", "s41_abs", "s23_abs"};
  Dataset ds = from_sweep(FigureId::fig6b, spec, threads);
  // top axis of the figure: the phase-matching number (2n - 1 = theta / (pi/2))
  std::vector<double> n;
  for (double t : ds.column("theta").values) n.push_back((t / (pi / 2) + 1) / 2);
  Dataset out;
  out.add_column("theta", ds.column("theta").values);
  out.add_column("phase_matching_n", std::move(n));
  for (const char* c : {"alpha", "s41_abs", "s23_abs"}) out.add_column(c, ds.column(c).values);
  out.provenance = ds.provenance;
  return out;
}

const std::vector<std::string> fig8_outputs{
    "circ0_re", "circ0_im", "circ1_re", "circ1_im", "circ2_re", "circ2_im",
    "published0_re", "published0_im", "published1_re", "published1_im",
    "published2_re", "published2_im",
    "gap0", "gap1", "gap2"};

Dataset fig8a(unsigned threads) {
  SweepSpec spec;
  spec.family = Family::ring;
  spec.axes = {{"j_over_g", range(0, 1.5, fd::axis_points)}};
  spec.fixed = {{"G", fd::G}, {"kappa", 2 * (fd::G + fd::kappa_i)}, {"theta_over_halfpi", 1.0}};
  spec.outputs = fig8_outputs;
  Dataset ds = from_sweep(FigureId::fig8a, spec, threads);
  ds.provenance["note"] =
      "publishedK columns are the published closed forms, circK the circulant eigenvalues paired "
      "to them; gapK = |publishedK - circK|";
  return ds;
}

Dataset fig8b(unsigned threads) {
  SweepSpec spec;
  spec.family = Family::ring;
  spec.axes = {{"theta", range(0, 4 * pi, fd::axis_points)}};
  spec.fixed = {{"G", fd::G}, {"kappa", 2 * (fd::G + fd::kappa_i)}, {"j_over_g", 1.0}};
  spec.outputs = fig8_outputs;
  Dataset ds = from_sweep(FigureId::fig8b, spec, threads);
  ds.provenance["note"] =
      "publishedK columns are the published closed forms, circK the circulant eigenvalues paired "
      "to them; gapK = |publishedK - circK|";
  return ds;
}

Dataset fig9(unsigned threads) {
  const double kappa = fd::kappa_over_j_fig9 * fd::G;
  SweepSpec spec;
  spec.family = Family::ring;
  spec.axes = {{"theta_over_halfpi", {0, 1, 2, 3}},
               {"delta", range(-5 * kappa, 5 * kappa, fd::axis_points)}};
  spec.fixed = {{"G", fd::G}, {"j_over_g", 1.0}, {"kappa_over_j", fd::kappa_over_j_fig9}};
  spec.outputs = {"s21_abs", "s32_abs", "s13_abs", "s12_abs", "s23_abs", "s31_abs", "pole"};
  return from_sweep(FigureId::fig9, spec, threads);
}

}  // namespace

const std::vector<FigureId>& all_figures() {
  static const std::vector<FigureId> ids{FigureId::fig2a, FigureId::fig2b, FigureId::fig3a,
                                         FigureId::fig3b, FigureId::fig4a, FigureId::fig4b,
                                         FigureId::fig5,  FigureId::fig6b, FigureId::fig8a,
                                         FigureId::fig8b, FigureId::fig9};
  return ids;
}

std::string to_string(FigureId id) {
  switch (id) {
    case FigureId::fig2a: return "fig2a";
    case FigureId::fig2b: return "fig2b";
    case FigureId::fig3a: return "fig3a";
    case FigureId::fig3b: return "fig3b";
    case FigureId::fig4a: return "fig4a";
    case FigureId::fig4b: return "fig4b";
    case FigureId::fig5: return "fig5";
    case FigureId::fig6b: return "fig6b";
    case FigureId::fig8a: return "fig8a";
    case FigureId::fig8b: return "fig8b";
    case FigureId::fig9: return "fig9";
  }
  return "unknown";
}

FigureId parse_figure(std::string_view name) {
  std::string valid;
  for (FigureId id : all_figures()) {
    if (to_string(id) == name) return id;
    valid += (valid.empty() ? "" : ", ") + to_string(id);
  }
  throw ValidationError("unknown figure id '" + std::string(name) + "'; valid ids: " + valid);
}

Dataset figure_dataset(FigureId id, unsigned threads) {
  switch (id) {
    case FigureId::fig2a: return fig2a();
    case FigureId::fig2b: return fig2b(threads);
    case FigureId::fig3a: return fig3(id, 0.0, threads);
    case FigureId::fig3b: return fig3(id, 1.0, threads);
    case FigureId::fig4a: return fig4a(threads);
    case FigureId::fig4b: return fig4b(threads);
    case FigureId::fig5: return fig5(threads);
    case FigureId::fig6b: return fig6b(threads);
    case FigureId::fig8a: return fig8a(threads);
    case FigureId::fig8b: return fig8b(threads);
    case FigureId::fig9: return fig9(threads);
  }
  throw ValidationError("unknown figure id");
}

}  // namespace rdom
