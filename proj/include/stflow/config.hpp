#pragma once

// Run configuration: INI-style sections of key = value pairs.
//
//   [grid]        nx ny dx dy thickness            (nx ny dx dy required)
//   [time]        dt steps                         (both required)
//   [levels]      space time
//   [fluid]       oil_rho_ref oil_p_ref oil_cf oil_mu water_... gravity_x gravity_y
//   [relperm]     s_wirr s_or krw0 kro0 n_w n_o entry_pressure pc_exponent
//                 pc_linear_width
//   [rock]        source = synthetic | files, upscaling, porosity, anisotropy,
//                 kind seed mean log_variance correlation_length contrast
//                 channel_width amplitude wavelength (synthetic),
//                 kx_file ky_file porosity_file (files; relative to the config)
//   [initial]     pressure saturation
//   [well:NAME]   kind = injector | producer, i j (finest cell), value, radius
//   [solver]      newton_tol_rel newton_tol_abs newton_max_iters damping max_ds
//                 linear = direct | gmres, gmres_restart gmres_max_iters linear_tol
//   [adaptivity]  mode = adaptive | fine | coarse, mark_all warm_start residual_region
//   [output]      dir snapshot_every verbose_indicators
//
// Unknown sections and keys are errors.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "stflow/driver.hpp"
#include "stflow/fields.hpp"
#include "stflow/upscaling.hpp"

namespace stflow {

struct RockSpec {
  std::string source = "synthetic";
  std::string kx_file, ky_file, porosity_file;  // ky_file empty: isotropic
  SyntheticSpec synthetic;
  double anisotropy = 1.0;  // ky / kx of a synthetic field
  double porosity = 0.2;    // synthetic fields, uniform
  UpscaleMethod upscaling = UpscaleMethod::FlowBased;

  bool operator==(const RockSpec&) const = default;
};

struct NamedWell {
  std::string name;
  WellSpec spec;

  bool operator==(const NamedWell&) const = default;
};

struct RunConfig {
  CoarseGrid grid;
  int steps = 0;
  MeshLevels levels;
  FluidProps fluid;
  BrooksCoreyParams relperm;
  RockSpec rock;
  double initial_pressure = 1000.0;
  double initial_saturation = 0.2;
  std::vector<NamedWell> wells;
  NewtonConfig newton;
  LinearConfig linear;
  RunMode mode = RunMode::Adaptive;
  AdaptivityConfig adapt;
  std::string output_dir = "out";
  int snapshot_every = 0;

  bool operator==(const RunConfig&) const = default;

  void validate() const {
    try {
      grid.validate();
      levels.validate();
    } catch (const MeshError& e) {
      throw ConfigError(e.what());
    }
    if (steps < 0) throw ConfigError("[time] steps must be non-negative");
    fluid.validate();
    relperm.validate();
    if (rock.source != "synthetic" && rock.source != "files")
      throw ConfigError("[rock] source must be 'synthetic' or 'files'");
    if (rock.source == "files" && (rock.kx_file.empty() || rock.porosity_file.empty()))
      throw ConfigError("[rock] kx_file and porosity_file are required with source = files");
    if (rock.source == "synthetic") {
      rock.synthetic.validate();
      if (!(rock.porosity > 0 && rock.porosity <= 1)) throw ConfigError("[rock] porosity must lie in (0, 1]");
      if (!(rock.anisotropy > 0)) throw ConfigError("[rock] anisotropy must be positive");
    }
    if (!(initial_pressure > 0)) throw ConfigError("[initial] pressure must be positive");
    if (!(initial_saturation >= 0 && initial_saturation <= 1)) throw ConfigError("[initial] saturation must lie in [0, 1]");
    const int NX = grid.nx << levels.space_max, NY = grid.ny << levels.space_max;
    std::set<std::string> names;
    for (const auto& w : wells) {
      if (!names.insert(w.name).second) throw ConfigError("duplicate well '" + w.name + "'");
      try {
        w.spec.validate(NX, NY);
      } catch (const ConfigError& e) {
        throw ConfigError("[well:" + w.name + "] " + e.what());
      }
    }
    newton.validate();
    linear.validate();
    if (snapshot_every < 0) throw ConfigError("[output] snapshot_every must be non-negative");
  }
};

namespace detail {

namespace pt = boost::property_tree;

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

/// Typed access to one section; remembers which keys were read.
class SectionReader {
 public:
  SectionReader(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

  std::string raw(const std::string& key) {
    used_.insert(key);
    return trim(tree_->find(key)->second.data());
  }

  double number(const std::string& key, double fallback, bool required = false) {
    if (!has(key)) {
      if (required) throw ConfigError("missing required key [" + name_ + "] " + key);
      return fallback;
    }
    const std::string s = raw(key);
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("[" + name_ + "] " + key + ": '" + s + "' is not a number");
    }
  }

  int integer(const std::string& key, int fallback, bool required = false) {
    const double v = number(key, fallback, required);
    if (v != static_cast<double>(static_cast<long long>(v)) || std::abs(v) > 1e9)
      throw ConfigError("[" + name_ + "] " + key + " must be an integer");
    return static_cast<int>(v);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string s = raw(key);
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw ConfigError("[" + name_ + "] " + key + ": '" + s + "' is not a boolean");
  }

  std::string text(const std::string& key, const std::string& fallback) { return has(key) ? raw(key) : fallback; }

  void check_unused() const {
    if (!tree_) return;
    for (const auto& [k, v] : *tree_)
      if (!used_.count(k)) throw ConfigError("unknown key [" + name_ + "] " + k);
  }

 private:
  std::string name_;
  const pt::ptree* tree_;
  std::set<std::string> used_;
};

inline WellKind parse_well_kind(const std::string& s) {
  if (s == "injector") return WellKind::RateInjector;
  if (s == "producer") return WellKind::BhpProducer;
  throw ConfigError("unknown well kind '" + s + "' (injector, producer)");
}

}  // namespace detail

/// Parses configuration text. Relative field paths are resolved against base_dir.
inline RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  static const std::set<std::string> sections{"grid",   "time", "levels", "fluid",      "relperm",
                                              "rock",   "initial", "solver", "adaptivity", "output"};
  for (const auto& [name, sub] : tree) {
    if (sub.empty()) throw ConfigError("key '" + name + "' outside any section");
    if (!sections.count(name) && name.rfind("well:", 0) != 0) throw ConfigError("unknown section [" + name + "]");
  }
  auto section = [&](const std::string& name) {
    const auto it = tree.find(name);
    return detail::SectionReader(name, it == tree.not_found() ? nullptr : &it->second);
  };

  RunConfig c;
  {
    auto s = section("grid");
    c.grid.nx = s.integer("nx", 0, true);
    c.grid.ny = s.integer("ny", 0, true);
    c.grid.dx = s.number("dx", 0, true);
    c.grid.dy = s.number("dy", 0, true);
    c.grid.thickness = s.number("thickness", c.grid.thickness);
    s.check_unused();
  }
  {
    auto s = section("time");
    c.grid.dt = s.number("dt", 0, true);
    c.steps = s.integer("steps", 0, true);
    s.check_unused();
  }
  {
    auto s = section("levels");
    c.levels.space_max = s.integer("space", 0);
    c.levels.time_max = s.integer("time", 0);
    s.check_unused();
  }
  {
    auto s = section("fluid");
    for (auto [prefix, ph] : {std::pair{"oil_", &c.fluid.oil}, std::pair{"water_", &c.fluid.water}}) {
      const std::string p = prefix;
      ph->rho_ref = s.number(p + "rho_ref", ph->rho_ref);
      ph->p_ref = s.number(p + "p_ref", ph->p_ref);
      ph->c_f = s.number(p + "cf", ph->c_f);
      ph->mu = s.number(p + "mu", ph->mu);
    }
    c.fluid.gravity[0] = s.number("gravity_x", 0.0);
    c.fluid.gravity[1] = s.number("gravity_y", 0.0);
    s.check_unused();
  }
  {
    auto s = section("relperm");
    auto& r = c.relperm;
    r.s_wirr = s.number("s_wirr", r.s_wirr);
    r.s_or = s.number("s_or", r.s_or);
    r.krw0 = s.number("krw0", r.krw0);
    r.kro0 = s.number("kro0", r.kro0);
    r.n_w = s.number("n_w", r.n_w);
    r.n_o = s.number("n_o", r.n_o);
    r.entry_pressure = s.number("entry_pressure", r.entry_pressure);
    r.pc_exponent = s.number("pc_exponent", r.pc_exponent);
    r.pc_linear_width = s.number("pc_linear_width", r.pc_linear_width);
    s.check_unused();
  }
  {
    auto s = section("rock");
    auto& r = c.rock;
    r.source = s.text("source", r.source);
    auto path = [&](const std::string& key) {
      std::string v = s.text(key, "");
      if (!v.empty() && !base_dir.empty() && std::filesystem::path(v).is_relative()) v = (base_dir / v).string();
      return v;
    };
    r.kx_file = path("kx_file");
    r.ky_file = path("ky_file");
    r.porosity_file = path("porosity_file");
    r.upscaling = parse_upscale_method(s.text("upscaling", to_string(r.upscaling)));
    r.porosity = s.number("porosity", r.porosity);
    r.anisotropy = s.number("anisotropy", r.anisotropy);
    auto& g = r.synthetic;
    g.kind = parse_field_kind(s.text("kind", to_string(g.kind)));
    const double seed = s.number("seed", static_cast<double>(g.seed));
    if (seed < 0 || seed != std::floor(seed) || seed > 9.0e15) throw ConfigError("[rock] seed must be a non-negative integer");
    g.seed = static_cast<std::uint64_t>(seed);
    g.mean = s.number("mean", g.mean);
    g.log_variance = s.number("log_variance", g.log_variance);
    g.correlation_length = s.number("correlation_length", g.correlation_length);
    g.contrast = s.number("contrast", g.contrast);
    g.channel_width = s.number("channel_width", g.channel_width);
    g.amplitude = s.number("amplitude", g.amplitude);
    g.wavelength = s.number("wavelength", g.wavelength);
    s.check_unused();
  }
  {
    auto s = section("initial");
    c.initial_pressure = s.number("pressure", c.initial_pressure);
    c.initial_saturation = s.number("saturation", c.initial_saturation);
    s.check_unused();
  }
  for (const auto& [name, sub] : tree) {
    if (name.rfind("well:", 0) != 0) continue;
    detail::SectionReader s(name, &sub);
    NamedWell w;
    w.name = name.substr(5);
    if (w.name.empty()) throw ConfigError("well section needs a name, e.g. [well:inj]");
    if (!s.has("kind")) throw ConfigError("missing required key [" + name + "] kind");
    w.spec.kind = detail::parse_well_kind(s.raw("kind"));
    w.spec.i = s.integer("i", 0, true);
    w.spec.j = s.integer("j", 0, true);
    w.spec.value = s.number("value", 0, true);
    w.spec.radius = s.number("radius", w.spec.radius);
    s.check_unused();
    c.wells.push_back(w);
  }
  {
    auto s = section("solver");
    c.newton.tol_rel = s.number("newton_tol_rel", c.newton.tol_rel);
    c.newton.tol_abs = s.number("newton_tol_abs", c.newton.tol_abs);
    c.newton.max_iters = s.integer("newton_max_iters", c.newton.max_iters);
    c.newton.damping = s.boolean("damping", c.newton.damping);
    c.newton.max_ds = s.number("max_ds", c.newton.max_ds);
    c.linear.backend = parse_linear_backend(s.text("linear", to_string(c.linear.backend)));
    c.linear.restart = s.integer("gmres_restart", c.linear.restart);
    c.linear.max_iters = s.integer("gmres_max_iters", c.linear.max_iters);
    c.linear.tol = s.number("linear_tol", c.linear.tol);
    s.check_unused();
  }
  {
    auto s = section("adaptivity");
    c.mode = parse_run_mode(s.text("mode", to_string(c.mode)));
    c.adapt.mark_all = s.boolean("mark_all", c.adapt.mark_all);
    c.adapt.warm_start = s.boolean("warm_start", c.adapt.warm_start);
    c.adapt.residual_region = s.boolean("residual_region", c.adapt.residual_region);
    s.check_unused();
  }
  {
    auto s = section("output");
    c.output_dir = s.text("dir", c.output_dir);
    c.snapshot_every = s.integer("snapshot_every", c.snapshot_every);
    c.adapt.keep_indicators = s.boolean("verbose_indicators", c.adapt.keep_indicators);
    s.check_unused();
  }
  c.validate();
  return c;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::filesystem::path(path).parent_path());
}

inline std::string serialize_config(const RunConfig& c) {
  namespace pt = boost::property_tree;
  pt::ptree t;
  auto num = [](double v) { return format_double(v); };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  t.put("grid.nx", c.grid.nx);
  t.put("grid.ny", c.grid.ny);
  t.put("grid.dx", num(c.grid.dx));
  t.put("grid.dy", num(c.grid.dy));
  t.put("grid.thickness", num(c.grid.thickness));
  t.put("time.dt", num(c.grid.dt));
  t.put("time.steps", c.steps);
  t.put("levels.space", c.levels.space_max);
  t.put("levels.time", c.levels.time_max);
  for (auto [p, ph] : {std::pair{"fluid.oil_", &c.fluid.oil}, std::pair{"fluid.water_", &c.fluid.water}}) {
    const std::string prefix = p;
    t.put(prefix + "rho_ref", num(ph->rho_ref));
    t.put(prefix + "p_ref", num(ph->p_ref));
    t.put(prefix + "cf", num(ph->c_f));
    t.put(prefix + "mu", num(ph->mu));
  }
  t.put("fluid.gravity_x", num(c.fluid.gravity[0]));
  t.put("fluid.gravity_y", num(c.fluid.gravity[1]));
  const auto& r = c.relperm;
  t.put("relperm.s_wirr", num(r.s_wirr));
  t.put("relperm.s_or", num(r.s_or));
  t.put("relperm.krw0", num(r.krw0));
  t.put("relperm.kro0", num(r.kro0));
  t.put("relperm.n_w", num(r.n_w));
  t.put("relperm.n_o", num(r.n_o));
  t.put("relperm.entry_pressure", num(r.entry_pressure));
  t.put("relperm.pc_exponent", num(r.pc_exponent));
  t.put("relperm.pc_linear_width", num(r.pc_linear_width));
  const auto& k = c.rock;
  t.put("rock.source", k.source);
  if (!k.kx_file.empty()) t.put("rock.kx_file", k.kx_file);
  if (!k.ky_file.empty()) t.put("rock.ky_file", k.ky_file);
  if (!k.porosity_file.empty()) t.put("rock.porosity_file", k.porosity_file);
  t.put("rock.upscaling", to_string(k.upscaling));
  t.put("rock.porosity", num(k.porosity));
  t.put("rock.anisotropy", num(k.anisotropy));
  t.put("rock.kind", to_string(k.synthetic.kind));
  t.put("rock.seed", k.synthetic.seed);
  t.put("rock.mean", num(k.synthetic.mean));
  t.put("rock.log_variance", num(k.synthetic.log_variance));
  t.put("rock.correlation_length", num(k.synthetic.correlation_length));
  t.put("rock.contrast", num(k.synthetic.contrast));
  t.put("rock.channel_width", num(k.synthetic.channel_width));
  t.put("rock.amplitude", num(k.synthetic.amplitude));
  t.put("rock.wavelength", num(k.synthetic.wavelength));
  t.put("initial.pressure", num(c.initial_pressure));
  t.put("initial.saturation", num(c.initial_saturation));
  for (const auto& w : c.wells) {
    pt::ptree s;
    s.put("kind", w.spec.kind == WellKind::RateInjector ? "injector" : "producer");
    s.put("i", w.spec.i);
    s.put("j", w.spec.j);
    s.put("value", num(w.spec.value));
    s.put("radius", num(w.spec.radius));
    t.push_back({"well:" + w.name, s});
  }
  t.put("solver.newton_tol_rel", num(c.newton.tol_rel));
  t.put("solver.newton_tol_abs", num(c.newton.tol_abs));
  t.put("solver.newton_max_iters", c.newton.max_iters);
  t.put("solver.damping", flag(c.newton.damping));
  t.put("solver.max_ds", num(c.newton.max_ds));
  t.put("solver.linear", c.linear.backend == LinearBackend::Direct ? "direct" : "gmres");
  t.put("solver.gmres_restart", c.linear.restart);
  t.put("solver.gmres_max_iters", c.linear.max_iters);
  t.put("solver.linear_tol", num(c.linear.tol));
  t.put("adaptivity.mode", to_string(c.mode));
  t.put("adaptivity.mark_all", flag(c.adapt.mark_all));
  t.put("adaptivity.warm_start", flag(c.adapt.warm_start));
  t.put("adaptivity.residual_region", flag(c.adapt.residual_region));
  t.put("output.dir", c.output_dir);
  t.put("output.snapshot_every", c.snapshot_every);
  t.put("output.verbose_indicators", flag(c.adapt.keep_indicators));
  std::ostringstream out;
  pt::write_ini(out, t);
  return out.str();
}

/// Finest-level property fields of a config, generated or loaded.
struct FinestRock {
  Field2D kx, ky, porosity;
};

inline FinestRock finest_rock(const RunConfig& c) {
  const int NX = c.grid.nx << c.levels.space_max, NY = c.grid.ny << c.levels.space_max;
  FinestRock r;
  if (c.rock.source == "synthetic") {
    r.kx = generate_synthetic_field(c.rock.synthetic, NX, NY);
    r.ky = r.kx;
    for (double& v : r.ky.values) v *= c.rock.anisotropy;
    r.porosity = Field2D(NX, NY, c.rock.porosity);
    return r;
  }
  r.kx = load_field(c.rock.kx_file);
  r.ky = c.rock.ky_file.empty() ? r.kx : load_field(c.rock.ky_file);
  r.porosity = load_field(c.rock.porosity_file);
  for (const auto* f : {&r.kx, &r.ky, &r.porosity})
    if (f->nx != NX || f->ny != NY)
      throw ConfigError("field is " + std::to_string(f->nx) + "x" + std::to_string(f->ny) + ", finest grid is " +
                        std::to_string(NX) + "x" + std::to_string(NY));
  for (double v : r.porosity.values)
    if (v > 1) throw ConfigError("porosity values must not exceed 1");
  return r;
}

inline SimulationSetup build_setup(const RunConfig& c) {
  c.validate();
  SimulationSetup s;
  s.grid = c.grid;
  s.levels = c.levels;
  s.model.fluid = c.fluid;
  s.model.relperm = c.relperm;
  const auto r = finest_rock(c);
  s.model.rock = build_rock_field(r.kx, r.ky, r.porosity, UpscaleSpec{c.levels.space_max + 1, 2, c.rock.upscaling});
  s.model.validate();
  for (const auto& w : c.wells) s.wells.push_back(w.spec);
  s.initial_pressure = c.initial_pressure;
  s.initial_saturation = c.initial_saturation;
  s.steps = c.steps;
  s.mode = c.mode;
  s.newton = c.newton;
  s.linear = c.linear;
  s.adapt = c.adapt;
  s.snapshot_every = c.snapshot_every;
  return s;
}

}  // namespace stflow
