#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "rdom/cli.hpp"
#include "rdom/scattering.hpp"
#include "rdom/spectra.hpp"

namespace rdom::cli {

namespace {

using nlohmann::json;

struct ParamFlag {
  const char* flag;
  const char* key;
  const char* help;
  std::optional<double> value;
};

struct Options {
  std::string config;
  std::string model;
  std::string out;
  unsigned threads = 0;
  std::vector<ParamFlag> params{
      {"--G", "G", "coherent coupling G", {}},
      {"--J", "J", "dissipative coupling J", {}},
      {"--j-over-g", "j_over_g", "J in units of G", {}},
      {"--theta", "theta", "coupling phase in radians", {}},
      {"--theta-over-halfpi", "theta_over_halfpi", "coupling phase in units of pi/2", {}},
      {"--kappa-i", "kappa_i", "intrinsic cavity loss", {}},
      {"--kappa-e", "kappa_e", "external cavity loss (default: critical coupling)", {}},
      {"--kappa", "kappa", "ring cavity loss", {}},
      {"--kappa-over-j", "kappa_over_j", "ring cavity loss in units of J", {}},
      {"--omega", "omega", "cavity frequency", {}},
      {"--gamma", "gamma", "mechanical damping", {}},
      {"--gamma-over-g", "gamma_over_g", "mechanical damping in units of G", {}},
  };

  // eigen
  bool compare_full = false;
  std::vector<std::string> closed_form;
  double ep_tol = coalescence_tolerance;
  // smatrix / chirality / bandwidth
  std::vector<std::string> pairs;
  std::vector<double> delta_range;
  std::size_t points = 2001;
  bool all_ports = false;
  std::vector<double> theta_range;
  std::size_t theta_points = 401;
  std::vector<double> gammas;
  // ep-find
  std::vector<double> box;
  std::size_t grid = 401;
  int order = 2;
  // figure
  std::string figure;
  bool all_figures = false;
};

/// Files are rendered in memory and written only after every computation
/// succeeded, so a failing run leaves no partial output behind.
struct Output {
  std::string name;
  std::string content;
};

void add_dataset(std::vector<Output>& files, const Dataset& ds, const std::string& stem) {
  if (ds.provenance.empty()) throw ValidationError("dataset '" + stem + "' has no provenance");
  files.push_back({stem + ".csv", ds.to_csv()});
  files.push_back({stem + ".meta.json", ds.provenance.dump(2) + "\n"});
}

void add_json(std::vector<Output>& files, const json& j, const std::string& name) {
  files.push_back({name, j.dump(2) + "\n"});
}

const std::vector<std::pair<const char*, const char*>> exclusive_pairs{
    {"J", "j_over_g"}, {"theta", "theta_over_halfpi"}, {"gamma", "gamma_over_g"},
    {"kappa", "kappa_over_j"}};

/// Merged configuration after flags have been applied.
struct Context {
  Config cfg;
  std::filesystem::path out_dir;
  unsigned threads = 0;
  std::string command;
};

Context resolve(const Options& opt, const std::string& command) {
  Context ctx;
  ctx.command = command;
  ctx.threads = opt.threads;
  if (!opt.config.empty()) ctx.cfg = load_config(opt.config);
  Config& cfg = ctx.cfg;
  if (!opt.model.empty()) {
    const Family f = parse_family(opt.model);
    if (f != cfg.family) {
      cfg.params.clear();
      cfg.explicit_full.reset();
    }
    cfg.family = f;
  }
  for (const auto& [a, b] : exclusive_pairs) {
    bool has_a = false, has_b = false;
    for (const auto& p : opt.params) {
      has_a = has_a || (p.value && p.key == std::string(a));
      has_b = has_b || (p.value && p.key == std::string(b));
    }
    if (has_a && has_b)
      throw ValidationError(std::string("give only one of ") + a + " and " + b);
  }
  for (const auto& p : opt.params) {
    if (!p.value) continue;
    if (!std::isfinite(*p.value))
      throw ValidationError(std::string(p.flag) + " must be finite");
    if (cfg.explicit_full) {
      const std::string key = p.key;
      if (key == "G") {
        cfg.explicit_full->params.G = *p.value;
      } else if (key == "gamma") {
        cfg.explicit_full->params.gamma = *p.value;
      } else {
        throw ValidationError(std::string(p.flag) +
                              " cannot override an explicit full model (only --G and --gamma)");
      }
      continue;
    }
    // a flag replaces the config value and its mutually exclusive partner
    for (const auto& [a, b] : exclusive_pairs) {
      if (p.key == std::string(a)) cfg.params.erase(b);
      if (p.key == std::string(b)) cfg.params.erase(a);
    }
    cfg.params[p.key] = *p.value;
  }
  if (cfg.explicit_full) cfg.explicit_full->params.validate();

  if (!opt.out.empty()) {
    ctx.out_dir = opt.out;
  } else if (cfg.out_dir) {
    ctx.out_dir = *cfg.out_dir;
  } else if (const char* env = std::getenv(out_dir_env); env && *env) {
    ctx.out_dir = env;
  } else {
    ctx.out_dir = ".";
  }
  return ctx;
}

json params_json(const EffectiveParams<double>& p) {
  return {{"omega", p.omega}, {"kappa_i", p.kappa_i}, {"kappa_e", p.kappa_e}, {"kappa", p.kappa()},
          {"G", p.G},         {"J", p.J},             {"theta", p.theta}};
}

json params_json(const FullParams<double>& p) {
  return {{"delta_a", p.delta_a}, {"delta_b", p.delta_b}, {"omega_m", p.omega_m},
          {"kappa_1", p.kappa_1}, {"kappa_2", p.kappa_2}, {"gamma", p.gamma},
          {"G", p.G},
          {"G_a", {p.G_a.real(), p.G_a.imag()}},
          {"G_b", {p.G_b.real(), p.G_b.imag()}}};
}

json params_json(const RingParams<double>& p) {
  return {{"omega", p.omega}, {"kappa", p.kappa}, {"G", p.G}, {"J", p.J}, {"theta", p.theta}};
}

json provenance(const Context& ctx, json model) {
  return {{"generator", "rdom"},
          {"version", version()},
          {"command", ctx.command},
          {"units", "rates in units of kappa_i"},
          {"family", to_string(ctx.cfg.family)},
          {"model", std::move(model)}};
}

void require_family(const Context& ctx, std::initializer_list<Family> allowed) {
  for (Family f : allowed)
    if (f == ctx.cfg.family) return;
  std::string list;
  for (Family f : allowed) list += (list.empty() ? "" : ", ") + to_string(f);
  throw ValidationError(ctx.command + " supports model " + list + ", not " +
                        to_string(ctx.cfg.family));
}

struct FullModel {
  FullParams<double> params;
  double port_rate = 0;
};

FullModel full_model(const Context& ctx) {
  if (ctx.cfg.explicit_full) return {ctx.cfg.explicit_full->params, ctx.cfg.explicit_full->port_rate};
  return {full_from(ctx.cfg.params), full_port_rate_from(ctx.cfg.params)};
}

/// Cavity loss scale used for default detuning windows.
double loss_scale(const Context& ctx) {
  switch (ctx.cfg.family) {
    case Family::effective: return effective_from(ctx.cfg.params).kappa();
    case Family::full: {
      const auto f = full_model(ctx);
      return std::max({f.params.kappa_1, f.params.kappa_2, f.port_rate});
    }
    case Family::ring: return ring_from(ctx.cfg.params).kappa;
  }
  return 1;
}

ProbeGrid<double> probe_grid(const Options& opt, const Context& ctx) {
  if (opt.points < 1) throw ValidationError("--points must be >= 1");
  if (!opt.delta_range.empty()) {
    if (opt.delta_range[1] < opt.delta_range[0])
      throw ValidationError("--delta-range must be given as LOW HIGH");
    return ProbeGrid<double>::linspace(opt.delta_range[0], opt.delta_range[1], opt.points);
  }
  const double span = 5 * loss_scale(ctx);
  return ProbeGrid<double>::linspace(-span, span, opt.points);
}

void require_no_sweep(const Context& ctx) {
  if (!ctx.cfg.axes.empty() || !ctx.cfg.outputs.empty())
    throw ValidationError(ctx.command + " does not use the sweep section; run 'sweep' instead");
}

// ---------------------------------------------------------------------------
// eigen

struct EigenRow {
  std::string source;
  int branch;
  Complex<double> value;
  bool ep;
};

std::string eigen_csv(const std::vector<EigenRow>& rows) {
  std::ostringstream os;
  os << "source,branch,re,im,ep\n";
  for (const auto& r : rows)
    os << r.source << ',' << r.branch << ',' << format_double(r.value.real()) << ','
       << format_double(r.value.imag()) << ',' << (r.ep ? 1 : 0) << '\n';
  return os.str();
}

void append(std::vector<EigenRow>& rows, const Spectrum<double>& s, bool ep) {
  for (std::size_t k = 0; k < s.size(); ++k)
    rows.push_back({to_string(s.source), s.branch_ids.empty() ? static_cast<int>(k) : s.branch_ids[k],
                    s.eigenvalues[k], ep});
}

bool is_theta_axis(const std::string& n) { return n == "theta" || n == "theta_over_halfpi"; }

std::vector<Output> eigen_sheets(const Options& opt, const Context& ctx) {
  const auto& axes = ctx.cfg.axes;
  if (ctx.cfg.family != Family::effective || axes.size() != 2 || !is_theta_axis(axes[0].name) ||
      axes[1].name != "j_over_g" || !ctx.cfg.outputs.empty() || opt.compare_full)
    throw ValidationError(
        "eigen sweeps need the effective model with axes [theta or theta_over_halfpi, j_over_g] "
        "and no outputs list");
  ParameterMap base = ctx.cfg.params;
  for (const char* k : {"theta", "theta_over_halfpi", "J", "j_over_g"}) base.erase(k);
  const auto model = effective_from(base);
  std::vector<double> thetas = axes[0].values;
  if (axes[0].name == "theta_over_halfpi")
    for (double& t : thetas) t *= half_pi<double>;
  const auto grid = sweep_riemann(model, thetas, axes[1].values);

  Dataset ds;
  std::vector<double> theta, ratio, branch, re, im, raw_re, raw_im;
  for (std::size_t it = 0; it < thetas.size(); ++it) {
    for (std::size_t ir = 0; ir < axes[1].values.size(); ++ir) {
      const auto& t = grid.tracked[grid.index(it, ir)];
      const auto& r = grid.raw[grid.index(it, ir)];
      for (std::size_t k = 0; k < t.size(); ++k) {
        theta.push_back(thetas[it]);
        ratio.push_back(axes[1].values[ir]);
        branch.push_back(t.branch_ids[k]);
        re.push_back(t.eigenvalues[k].real());
        im.push_back(t.eigenvalues[k].imag());
        raw_re.push_back(r.eigenvalues[k].real());
        raw_im.push_back(r.eigenvalues[k].imag());
      }
    }
  }
  ds.add_column("theta", std::move(theta));
  ds.add_column("j_over_g", std::move(ratio));
  ds.add_column("branch", std::move(branch));
  ds.add_column("re", std::move(re));
  ds.add_column("im", std::move(im));
  ds.add_column("raw_re", std::move(raw_re));
  ds.add_column("raw_im", std::move(raw_im));
  ds.provenance = provenance(ctx, params_json(model));
  std::vector<Output> files;
  add_dataset(files, ds, "sheets");
  return files;
}

std::vector<Output> cmd_eigen(const Options& opt, const Context& ctx, std::ostream& out) {
  if (!(opt.ep_tol >= 0)) throw ValidationError("--ep-tol must be >= 0");
  if (!ctx.cfg.axes.empty()) return eigen_sheets(opt, ctx);
  require_no_sweep(ctx);
  std::vector<EigenRow> rows;
  json meta;
  switch (ctx.cfg.family) {
    case Family::effective: {
      if (!opt.closed_form.empty()) throw ValidationError("--closed-form applies to the ring model");
      const auto& params = ctx.cfg.params;
      ParameterMap two_mode = params;
      if (opt.compare_full) {
        two_mode.erase("gamma");
        two_mode.erase("gamma_over_g");
      }
      const auto p = effective_from(two_mode);
      const double gap = eigengap(p);
      const bool ep = gap <= opt.ep_tol * p.G;
      append(rows, eig2_closed(p), ep);
      meta = provenance(ctx, params_json(p));
      meta["eigengap"] = gap;
      meta["ep"] = ep;
      if (opt.compare_full) {
        const auto f = full_from(params);
        append(rows, eig_numeric(build_full_matrix(f, full_port_rate_from(params))), false);
        meta["full_model"] = params_json(f);
        meta["adiabatic_error"] = adiabatic_error(p, f.gamma);
      }
      out << "eigengap " << format_double(gap) << (ep ? " (exceptional point)" : "") << '\n';
      break;
    }
    case Family::full: {
      if (!opt.closed_form.empty()) throw ValidationError("--closed-form applies to the ring model");
      const auto f = full_model(ctx);
      append(rows, eig_numeric(build_full_matrix(f.params, f.port_rate)), false);
      meta = provenance(ctx, params_json(f.params));
      meta["reversed_dissipation"] = f.params.reversed_dissipation();
      break;
    }
    case Family::ring: {
      auto forms = opt.closed_form;
      if (forms.empty()) forms = {"circulant"};
      const auto p = ring_from(ctx.cfg.params);
      const double tol = opt.ep_tol * p.G;
      meta = provenance(ctx, params_json(p));
      bool paper = false, circulant = false;
      for (const auto& f : forms) {
        if (f == "paper") {
          paper = true;
        } else if (f == "circulant") {
          circulant = true;
        } else if (f != "numeric") {
          throw ValidationError("--closed-form accepts paper, circulant, numeric; got '" + f + "'");
        }
      }
      for (const auto& f : forms) {
        Spectrum<double> s = f == "paper"       ? ring_eig_paper(p)
                             : f == "circulant" ? ring_eig_circulant(p)
                                                : eig_numeric(build_ring_matrix(p));
        append(rows, s, spectral_spread(s) <= tol);
      }
      if (paper && circulant) {
        const auto d = ring_discrepancy(p);
        meta["discrepancy"] = {{"branch_gap", d.branch_gap},
                               {"char_poly_residual", d.char_poly_residual},
                               {"normality", d.normality}};
        out << "published vs circulant branch gaps:";
        for (double g : d.branch_gap) out << ' ' << format_double(g);
        out << '\n';
      }
      break;
    }
  }
  meta["ep_tolerance"] = opt.ep_tol;
  std::vector<Output> files;
  files.push_back({"eigen.csv", eigen_csv(rows)});
  add_json(files, meta, "eigen.meta.json");
  return files;
}

// ---------------------------------------------------------------------------
// smatrix

struct PortPair {
  int to;
  int from;
  std::string label;
};

std::vector<PortPair> parse_pairs(const std::vector<std::string>& raw, Family family) {
  std::vector<std::string> labels = raw;
  if (labels.empty())
    labels = family == Family::ring ? std::vector<std::string>{"21", "12"}
                                    : std::vector<std::string>{"21", "41", "14"};
  std::vector<PortPair> out;
  for (const auto& l : labels) {
    const bool ok_shape = l.size() == 2 && std::isdigit(static_cast<unsigned char>(l[0])) &&
                          std::isdigit(static_cast<unsigned char>(l[1]));
    bool ok = ok_shape;
    if (ok_shape && family == Family::ring) {
      ok = l[0] >= '1' && l[0] <= '3' && l[1] >= '1' && l[1] <= '3';
    } else if (ok_shape) {
      std::vector<std::string> valid{"21", "43", "41", "14"};
      if (family == Family::effective) valid.push_back("23");
      ok = std::find(valid.begin(), valid.end(), l) != valid.end();
    }
    if (!ok)
      throw ValidationError("invalid --pair '" + l + "' for model " + to_string(family) +
                            (family == Family::ring ? " (use ij with i, j in 1..3)"
                                                    : " (use 21, 43, 41, 14" +
                                                          std::string(family == Family::effective
                                                                          ? ", 23)"
                                                                          : ")")));
    out.push_back({l[0] - '0', l[1] - '0', l});
  }
  return out;
}

Complex<double> four_port_entry(const FourPort<double>& fp, const std::string& label) {
  if (label == "21") return fp.s21;
  if (label == "43") return fp.s43;
  if (label == "41") return fp.s41;
  return fp.s14;
}

json smatrix_record(double delta, const MatrixX<double>& s) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < s.cols(); ++j) row.push_back({s(i, j).real(), s(i, j).imag()});
    rows.push_back(row);
  }
  return {{"delta", delta}, {"s", rows}};
}

std::vector<Output> cmd_smatrix(const Options& opt, const Context& ctx, std::ostream& out) {
  require_no_sweep(ctx);
  const auto pairs = parse_pairs(opt.pairs, ctx.cfg.family);
  const auto grid = probe_grid(opt, ctx);
  const std::size_t n = grid.size();
  std::vector<std::vector<Complex<double>>> values(pairs.size(), std::vector<Complex<double>>(n));
  std::vector<double> pole(n, 0.0);
  std::vector<json> records(opt.all_ports ? n : 0);
  json model;
  std::vector<std::string> port_labels;

  switch (ctx.cfg.family) {
    case Family::effective: {
      const auto p = effective_from(ctx.cfg.params);
      model = params_json(p);
      const auto cm = build_effective_matrix(p);
      port_labels = {"a", "b"};
      parallel_for(n, ctx.threads, [&](std::size_t i) {
        const double delta = grid.delta_values[i];
        const auto modes = s_general(cm, probe_frequency(p.omega, delta));
        const auto fp = four_port(modes);
        for (std::size_t k = 0; k < pairs.size(); ++k) {
          const auto& l = pairs[k].label;
          values[k][i] = l == "21"   ? s21_closed(p, delta)
                         : l == "41" ? s41_closed(p, delta)
                         : l == "14" ? s14_closed(p, delta)
                         : l == "23" ? s23_mirror(p, delta)
                                     : four_port_entry(fp, l);
        }
        if (opt.all_ports) records[i] = smatrix_record(delta, modes.s);
      });
      break;
    }
    case Family::full: {
      const auto f = full_model(ctx);
      model = params_json(f.params);
      model["port_rate"] = f.port_rate;
      const auto cm = build_full_matrix(f.params, f.port_rate);
      port_labels = {"a", "b"};
      parallel_for(n, ctx.threads, [&](std::size_t i) {
        const double delta = grid.delta_values[i];
        const auto modes = s_general(cm, probe_frequency(f.params.delta_a, delta));
        const auto fp = four_port(modes);
        for (std::size_t k = 0; k < pairs.size(); ++k) values[k][i] = four_port_entry(fp, pairs[k].label);
        if (opt.all_ports) records[i] = smatrix_record(delta, modes.s);
      });
      break;
    }
    case Family::ring: {
      const auto p = ring_from(ctx.cfg.params);
      model = params_json(p);
      port_labels = {"1", "2", "3"};
      constexpr double nan = std::numeric_limits<double>::quiet_NaN();
      parallel_for(n, ctx.threads, [&](std::size_t i) {
        const double delta = grid.delta_values[i];
        try {
          const auto rs = ring_s_closed(p, delta);
          for (std::size_t k = 0; k < pairs.size(); ++k)
            values[k][i] = rs.s.at(static_cast<std::size_t>(pairs[k].to),
                                   static_cast<std::size_t>(pairs[k].from));
          if (opt.all_ports) records[i] = smatrix_record(delta, rs.s.s);
        } catch (const NumericalError&) {
          pole[i] = 1.0;
          for (auto& v : values) v[i] = {nan, nan};
          if (opt.all_ports) records[i] = {{"delta", delta}, {"s", nullptr}, {"pole", true}};
        }
      });
      break;
    }
  }

  std::vector<Output> files;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    Dataset ds;
    std::vector<double> re(n), im(n), mag(n);
    for (std::size_t i = 0; i < n; ++i) {
      re[i] = values[k][i].real();
      im[i] = values[k][i].imag();
      mag[i] = std::abs(values[k][i]);
    }
    ds.add_column("delta", grid.delta_values);
    ds.add_column("re", std::move(re));
    ds.add_column("im", std::move(im));
    ds.add_column("abs", std::move(mag));
    if (ctx.cfg.family == Family::ring) ds.add_column("pole", pole);
    ds.provenance = provenance(ctx, model);
    ds.provenance["pair"] = pairs[k].label;
    add_dataset(files, ds, "s" + pairs[k].label);
  }
  if (opt.all_ports) {
    json j = provenance(ctx, model);
    j["ports"] = port_labels;
    j["records"] = records;
    add_json(files, j, "smatrix.json");
  }
  const auto poles = static_cast<std::size_t>(std::count(pole.begin(), pole.end(), 1.0));
  if (poles > 0) out << poles << " detuning(s) hit a pole of the closed form; rows flagged\n";
  return files;
}

// ---------------------------------------------------------------------------
// ep-find

json ep_json(const EpRecord<double>& ep) {
  return {{"theta_star", ep.theta_star},
          {"theta_over_halfpi", ep.theta_star / half_pi<double>},
          {"j_over_g", ep.j_over_g},
          {"n", ep.n},
          {"parity", to_string(ep.parity)},
          {"eigengap", ep.eigengap},
          {"order", ep.order},
          {"source", ep.source}};
}

std::vector<Output> cmd_ep_find(const Options& opt, const Context& ctx, std::ostream& out) {
  require_no_sweep(ctx);
  SearchBox<double> box;
  if (!opt.box.empty()) {
    box.theta_min = opt.box[0];
    box.theta_max = opt.box[1];
    box.ratio_min = opt.box[2];
    box.ratio_max = opt.box[3];
  }
  box.theta_points = box.ratio_points = opt.grid;
  box.validate();

  json list = json::array();
  json meta;
  if (opt.order == 2) {
    if (ctx.cfg.family != Family::effective)
      throw ValidationError("--order 2 searches the effective two-mode model");
    const auto p = effective_from(ctx.cfg.params);
    for (const auto& ep : locate_eps(p, box)) list.push_back(ep_json(ep));
    meta = provenance(ctx, params_json(p));
    out << list.size() << " exceptional point(s)\n";
  } else if (opt.order == 3) {
    if (ctx.cfg.family != Family::ring)
      throw ValidationError("--order 3 searches the ring model");
    const auto p = ring_from(ctx.cfg.params);
    const auto report = locate_ring_eps(p, box);
    for (const auto& ep : report.numeric) list.push_back(ep_json(ep));
    for (const auto& ep : report.as_published) list.push_back(ep_json(ep));
    meta = provenance(ctx, params_json(p));
    meta["min_numeric_spread"] = report.min_numeric_spread;
    meta["defective_points"] = report.numeric.size();
    meta["published_coalescences"] = report.as_published.size();
    out << report.numeric.size() << " defective point(s) of the ring matrix; "
        << report.as_published.size() << " coalescence point(s) of the published formulas\n";
  } else {
    throw ValidationError("--order must be 2 or 3");
  }
  meta["box"] = {{"theta", {box.theta_min, box.theta_max}},
                 {"j_over_g", {box.ratio_min, box.ratio_max}},
                 {"points", opt.grid}};
  meta["tolerance"] = coalescence_tolerance;
  std::vector<Output> files;
  add_json(files, list, "eps.json");
  add_json(files, meta, "eps.meta.json");
  return files;
}

// ---------------------------------------------------------------------------
// chirality, bandwidth, sweep, figure

std::vector<Output> cmd_chirality(const Options& opt, const Context& ctx, std::ostream&) {
  require_no_sweep(ctx);
  require_family(ctx, {Family::effective});
  SweepSpec spec;
  spec.family = Family::effective;
  spec.fixed = ctx.cfg.params;
  spec.fixed.erase("delta");
  if (!opt.theta_range.empty()) {
    spec.fixed.erase("theta");
    spec.fixed.erase("theta_over_halfpi");
    spec.axes.push_back({"theta", linspace(opt.theta_range[0], opt.theta_range[1], opt.theta_points)});
  }
  const double delta0 = ctx.cfg.params.count("delta") ? ctx.cfg.params.at("delta") : 0.0;
  if (!opt.delta_range.empty()) {
    spec.axes.push_back({"delta", probe_grid(opt, ctx).delta_values});
  } else if (spec.axes.empty()) {
    spec.axes.push_back({"delta", {delta0}});
  } else {
    spec.fixed["delta"] = delta0;
  }
  spec.outputs = {"alpha", "s41_abs", "s23_abs"};
  Dataset ds = run_sweep(spec, ctx.threads);
  json prov = provenance(ctx, params_json(effective_from(ctx.cfg.params)));
  prov["sweep"] = ds.provenance["sweep"];
  ds.provenance = prov;
  std::vector<Output> files;
  add_dataset(files, ds, "chirality");
  return files;
}

std::string gamma_label(double r) {
  std::ostringstream os;
  os << "D_gamma_" << r << "G";
  return os.str();
}

std::vector<Output> cmd_bandwidth(const Options& opt, const Context& ctx, std::ostream& out) {
  require_no_sweep(ctx);
  require_family(ctx, {Family::effective});
  const auto e = effective_from(ctx.cfg.params);
  const auto gammas = opt.gammas.empty() ? figure_defaults::fig5_gamma_over_g : opt.gammas;
  for (double g : gammas)
    if (!(g > 0) || !std::isfinite(g)) throw ValidationError("--gamma-over-g-list values must be > 0");
  if (!(e.G > 0)) throw ValidationError("bandwidth needs G > 0 (gamma is given in units of G)");
  const auto grid = probe_grid(opt, ctx);

  std::vector<TransmissionCurve<double>> curves(gammas.size());
  parallel_for(gammas.size(), ctx.threads, [&](std::size_t k) {
    curves[k] = nonreciprocity_curve(lift(e, gammas[k] * e.G), grid, full_port_rate(e));
  });
  const auto eff = nonreciprocity_curve(e, grid);

  Dataset ds;
  ds.add_column("delta", grid.delta_values);
  const auto real_part = [](const TransmissionCurve<double>& c) {
    std::vector<double> v;
    for (const auto& z : c.values) v.push_back(z.real());
    return v;
  };
  ds.add_column("D_effective", real_part(eff));
  json summary = provenance(ctx, params_json(e));
  summary["effective"] = {{"fwhm", fwhm(eff)}, {"area", nonreciprocal_area(eff)}};
  json list = json::array();
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    ds.add_column(gamma_label(gammas[k]), real_part(curves[k]));
    const double w = fwhm(curves[k]);
    list.push_back({{"gamma_over_g", gammas[k]}, {"column", gamma_label(gammas[k])},
                    {"fwhm", w}, {"area", nonreciprocal_area(curves[k])}});
    out << gamma_label(gammas[k]) << " fwhm " << format_double(w) << '\n';
  }
  summary["full_model"] = list;
  summary["port_rate"] = full_port_rate(e);
  ds.provenance = provenance(ctx, params_json(e));
  std::vector<Output> files;
  add_dataset(files, ds, "bandwidth");
  add_json(files, summary, "bandwidth.json");
  return files;
}

std::vector<Output> cmd_sweep(const Options&, const Context& ctx, std::ostream&) {
  if (ctx.cfg.explicit_full) throw ValidationError("sweeps use the (J, theta) form of the full model");
  SweepSpec spec;
  spec.family = ctx.cfg.family;
  spec.axes = ctx.cfg.axes;
  spec.fixed = ctx.cfg.params;
  spec.outputs = ctx.cfg.outputs;
  if (spec.axes.empty()) throw ValidationError("sweep needs sweep.axes in the config");
  if (spec.outputs.empty()) spec.outputs = output_names(spec.family);
  Dataset ds = run_sweep(spec, ctx.threads);
  json prov = provenance(ctx, nullptr);
  prov["sweep"] = ds.provenance["sweep"];
  ds.provenance = prov;
  std::vector<Output> files;
  add_dataset(files, ds, "sweep");
  return files;
}

std::vector<Output> cmd_figure(const Options& opt, const Context& ctx, std::ostream&) {
  if (opt.all_figures == !opt.figure.empty())
    throw ValidationError("figure needs exactly one of <id> or --all");
  std::vector<FigureId> ids = opt.all_figures ? all_figures()
                                              : std::vector<FigureId>{parse_figure(opt.figure)};
  std::vector<Output> files;
  for (FigureId id : ids) add_dataset(files, figure_dataset(id, ctx.threads), to_string(id));
  return files;
}

void write_all(const std::filesystem::path& dir, const std::vector<Output>& files,
               std::ostream& out) {
  std::filesystem::create_directories(dir);
  for (const auto& f : files) {
    const auto path = dir / f.name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << f.content;
    if (!os) throw std::runtime_error("failed writing " + path.string());
    out << "wrote " << path.string() << '\n';
  }
}

void add_common(CLI::App* sub, Options& opt) {
  sub->add_option("--config", opt.config, "YAML config file")->check(CLI::ExistingFile);
  sub->add_option("--model", opt.model, "model family: effective, full or ring");
  for (auto& p : opt.params) sub->add_option(p.flag, p.value, p.help);
  sub->add_option("--out", opt.out,
                  std::string("output directory (default: config, then $") + out_dir_env + ", then .)");
  sub->add_option("--threads", opt.threads, "worker threads (0: all cores)");
}

void add_grid(CLI::App* sub, Options& opt) {
  sub->add_option("--delta-range", opt.delta_range, "probe detuning LOW HIGH (default: +-5 kappa)")
      ->expected(2);
  sub->add_option("--points", opt.points, "probe points")->check(CLI::PositiveNumber);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Reversed-dissipation optomechanics: spectra, exceptional points, scattering"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  using Command = std::vector<Output> (*)(const Options&, const Context&, std::ostream&);
  std::vector<std::pair<CLI::App*, Command>> commands;

  auto* eigen = app.add_subcommand("eigen", "eigenvalues of the selected model");
  add_common(eigen, opt);
  eigen->add_flag("--compare-full", opt.compare_full, "add the three-mode numeric branches");
  eigen->add_option("--closed-form", opt.closed_form, "ring eigenvalue sets: paper, circulant, numeric")
      ->delimiter(',');
  eigen->add_option("--ep-tol", opt.ep_tol, "EP flag threshold on the eigengap, in units of G");
  commands.emplace_back(eigen, &cmd_eigen);

  auto* smatrix = app.add_subcommand("smatrix", "transmission spectra");
  add_common(smatrix, opt);
  add_grid(smatrix, opt);
  smatrix->add_option("--pair", opt.pairs, "port pair 'to from', e.g. 41 (repeatable)");
  smatrix->add_flag("--all-ports", opt.all_ports, "also dump the full S matrix per detuning");
  commands.emplace_back(smatrix, &cmd_smatrix);

  auto* ep_find = app.add_subcommand("ep-find", "locate exceptional points");
  add_common(ep_find, opt);
  ep_find->add_option("--box", opt.box, "THETA_MIN THETA_MAX JG_MIN JG_MAX (radians)")->expected(4);
  ep_find->add_option("--grid", opt.grid, "scan points per axis")->check(CLI::Range(2, 100000));
  ep_find->add_option("--order", opt.order, "2 (two-mode) or 3 (ring)");
  commands.emplace_back(ep_find, &cmd_ep_find);

  auto* chir = app.add_subcommand("chirality", "chirality alpha over theta and detuning");
  add_common(chir, opt);
  add_grid(chir, opt);
  chir->add_option("--theta-range", opt.theta_range, "theta LOW HIGH in radians")->expected(2);
  chir->add_option("--theta-points", opt.theta_points, "theta points")->check(CLI::PositiveNumber);
  commands.emplace_back(chir, &cmd_chirality);

  auto* bw = app.add_subcommand("bandwidth", "nonreciprocity bandwidth versus mechanical damping");
  add_common(bw, opt);
  add_grid(bw, opt);
  bw->add_option("--gamma-over-g-list", opt.gammas, "mechanical damping values in units of G")
      ->delimiter(',');
  commands.emplace_back(bw, &cmd_bandwidth);

  auto* sweep = app.add_subcommand("sweep", "grid sweep described by the config sweep section");
  add_common(sweep, opt);
  commands.emplace_back(sweep, &cmd_sweep);

  auto* figure = app.add_subcommand("figure", "write a figure dataset");
  add_common(figure, opt);
  figure->add_option("id", opt.figure, "figure id");
  figure->add_flag("--all", opt.all_figures, "write every figure dataset");
  commands.emplace_back(figure, &cmd_figure);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ExitCode::ok : ExitCode::validation_error;
  }

  try {
    for (const auto& [sub, command] : commands) {
      if (!sub->parsed()) continue;
      const Context ctx = resolve(opt, sub->get_name());
      const auto files = command(opt, ctx, out);
      write_all(ctx.out_dir, files, out);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::validation_error;
  } catch (const YAML::Exception& e) {
    err << "error: config: " << e.what() << '\n';
    return ExitCode::validation_error;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return ExitCode::numerical_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::validation_error;
  }
  return ExitCode::ok;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace rdom::cli
