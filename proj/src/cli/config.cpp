#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "rdom/cli.hpp"
#include "rdom/spectra.hpp"

namespace rdom::cli {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ValidationError("config: " + path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void require_map(const YAML::Node& node, const std::string& path) {
  if (!node.IsMap()) fail(path, "expected a mapping");
}

void allow_keys(const YAML::Node& node, const std::string& path,
                const std::vector<std::string>& allowed) {
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(join(path, key), "unknown key (allowed: " + list + ")");
    }
  }
}

double number(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) fail(path, "expected a number");
  try {
    const double v = node.as<double>();
    if (!std::isfinite(v)) fail(path, "must be finite");
    return v;
  } catch (const YAML::Exception&) {
    fail(path, "expected a number, got '" + node.Scalar() + "'");
  }
}

std::string text(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) fail(path, "expected a string");
  return node.Scalar();
}

std::size_t count(const YAML::Node& node, const std::string& path) {
  const double v = number(node, path);
  if (v < 1 || v != std::floor(v)) fail(path, "expected a positive integer");
  return static_cast<std::size_t>(v);
}

Complex<double> complex_value(const YAML::Node& node, const std::string& path) {
  if (node.IsScalar()) return {number(node, path), 0.0};
  if (!node.IsSequence() || node.size() != 2) fail(path, "expected a number or [re, im]");
  return {number(node[0], path + "[0]"), number(node[1], path + "[1]")};
}

const std::vector<std::string> explicit_full_keys{"delta_a", "delta_b", "omega_m", "kappa_1",
                                                  "kappa_2", "gamma",   "G",       "G_a",
                                                  "G_b",     "port_rate"};

ExplicitFull parse_explicit_full(const YAML::Node& node, const std::string& path) {
  allow_keys(node, path, explicit_full_keys);
  for (const char* required : {"G_a", "G_b", "gamma"})
    if (!node[required]) fail(join(path, required), "required for an explicit full model");
  ExplicitFull out;
  auto& f = out.params;
  const auto opt = [&](const char* key, double& target) {
    if (node[key]) target = number(node[key], join(path, key));
  };
  opt("delta_a", f.delta_a);
  opt("delta_b", f.delta_b);
  opt("omega_m", f.omega_m);
  opt("kappa_1", f.kappa_1);
  opt("kappa_2", f.kappa_2);
  opt("gamma", f.gamma);
  opt("G", f.G);
  f.G_a = complex_value(node["G_a"], join(path, "G_a"));
  f.G_b = complex_value(node["G_b"], join(path, "G_b"));
  out.port_rate = f.kappa_1;
  opt("port_rate", out.port_rate);
  try {
    f.validate();
  } catch (const ValidationError& e) {
    fail(path, e.what());
  }
  if (!(out.port_rate >= 0)) fail(join(path, "port_rate"), "must be >= 0");
  return out;
}

bool is_explicit_full(const YAML::Node& node) {
  for (const char* key : {"G_a", "G_b", "kappa_1", "kappa_2", "delta_a", "delta_b", "omega_m",
                          "port_rate"})
    if (node[key]) return true;
  return false;
}

void parse_model(const YAML::Node& node, Config& cfg) {
  require_map(node, "model");
  allow_keys(node, "model", {"effective", "full", "ring"});
  if (node.size() != 1) fail("model", "exactly one of effective, full, ring is required");
  const auto key = node.begin()->first.as<std::string>();
  const YAML::Node body = node.begin()->second;
  const std::string path = join("model", key);
  cfg.family = parse_family(key);
  if (body.IsNull()) return;
  require_map(body, path);
  if (cfg.family == Family::full && is_explicit_full(body)) {
    cfg.explicit_full = parse_explicit_full(body, path);
    return;
  }
  allow_keys(body, path, parameter_names(cfg.family));
  std::vector<std::string> names;
  for (const auto& kv : body) {
    const auto name = kv.first.as<std::string>();
    cfg.params[name] = number(kv.second, join(path, name));
    names.push_back(name);
  }
  try {
    validate_parameters(cfg.family, names);
  } catch (const ValidationError& e) {
    fail(path, e.what());
  }
}

Axis parse_axis(const YAML::Node& node, const std::string& path) {
  require_map(node, path);
  allow_keys(node, path, {"name", "from", "to", "points", "values"});
  if (!node["name"]) fail(join(path, "name"), "required");
  Axis axis;
  axis.name = text(node["name"], join(path, "name"));
  if (node["values"]) {
    if (node["from"] || node["to"] || node["points"])
      fail(path, "give either values or from/to/points");
    const YAML::Node values = node["values"];
    if (!values.IsSequence() || values.size() == 0)
      fail(join(path, "values"), "expected a non-empty list");
    for (std::size_t i = 0; i < values.size(); ++i)
      axis.values.push_back(number(values[i], join(path, "values") + "[" + std::to_string(i) + "]"));
    return axis;
  }
  for (const char* key : {"from", "to", "points"})
    if (!node[key]) fail(join(path, key), "required");
  axis.values = linspace(number(node["from"], join(path, "from")),
                         number(node["to"], join(path, "to")),
                         count(node["points"], join(path, "points")));
  return axis;
}

void parse_sweep(const YAML::Node& node, Config& cfg) {
  require_map(node, "sweep");
  allow_keys(node, "sweep", {"axes", "outputs"});
  if (const YAML::Node axes = node["axes"]) {
    if (!axes.IsSequence()) fail("sweep.axes", "expected a list of axes");
    for (std::size_t i = 0; i < axes.size(); ++i)
      cfg.axes.push_back(parse_axis(axes[i], "sweep.axes[" + std::to_string(i) + "]"));
  }
  if (const YAML::Node outputs = node["outputs"]) {
    if (!outputs.IsSequence()) fail("sweep.outputs", "expected a list of column names");
    for (std::size_t i = 0; i < outputs.size(); ++i)
      cfg.outputs.push_back(text(outputs[i], "sweep.outputs[" + std::to_string(i) + "]"));
  }
}

void parse_output(const YAML::Node& node, Config& cfg) {
  require_map(node, "output");
  allow_keys(node, "output", {"dir", "format"});
  if (node["dir"]) cfg.out_dir = text(node["dir"], "output.dir");
  if (node["format"]) {
    cfg.format = text(node["format"], "output.format");
    if (cfg.format != "csv") fail("output.format", "only 'csv' is supported");
  }
}

}  // namespace

Config parse_config(const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(source);
  } catch (const YAML::Exception& e) {
    throw ValidationError(std::string("config: malformed YAML: ") + e.what());
  }
  Config cfg;
  if (root.IsNull()) return cfg;
  require_map(root, "<root>");
  allow_keys(root, "", {"units", "model", "sweep", "output"});
  if (const YAML::Node units = root["units"]) {
    if (text(units, "units") != "kappa_i")
      fail("units", "rates are in units of kappa_i; only 'kappa_i' is accepted");
  }
  if (const YAML::Node model = root["model"]) parse_model(model, cfg);
  if (const YAML::Node sweep = root["sweep"]) parse_sweep(sweep, cfg);
  if (const YAML::Node output = root["output"]) parse_output(output, cfg);
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace rdom::cli
