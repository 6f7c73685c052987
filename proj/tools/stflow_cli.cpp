// stflow: run the space-time adaptive simulator, upscale fields, compare runs.
//
// Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 I/O error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stflow/stflow.hpp"

namespace fs = std::filesystem;
using namespace stflow;

namespace {

int run_command(const std::string& config_path, const std::optional<std::string>& mode,
                const std::optional<std::string>& linear, const std::optional<std::string>& out_dir,
                bool verbose_indicators) {
  RunConfig c = parse_config(config_path);
  if (mode) c.mode = parse_run_mode(*mode);
  if (linear) c.linear.backend = parse_linear_backend(*linear);
  if (out_dir) c.output_dir = *out_dir;
  if (verbose_indicators) c.adapt.keep_indicators = true;
  c.validate();
  const SimulationSetup setup = build_setup(c);

  std::cout << "running " << to_string(c.mode) << ": " << c.grid.nx << "x" << c.grid.ny << " coarse cells, levels "
            << c.levels.space_max << "+" << c.levels.time_max << ", " << c.steps << " steps of " << c.grid.dt
            << " days, " << to_string(c.linear.backend) << " solver\n";
  SimulationResult res;
  try {
    res = run_simulation(setup);
  } catch (const StepFailure& f) {
    std::cerr << "pass log of the failing step:\n";
    for (const auto& p : f.plan().passes)
      std::cerr << "  " << to_string(p.kind) << ": " << p.elements << " elements, " << p.newton.iterations
                << " Newton iterations\n";
    throw;
  }
  export_results(res, c.output_dir);
  {
    std::ofstream cfg(fs::path(c.output_dir) / "config.ini");
    cfg << serialize_config(c);
    if (!cfg) throw IoError("cannot write config.ini to '" + c.output_dir + "'");
  }
  const auto& r = res.report;
  std::printf("steps %d, passes %d, Newton iterations %d, linear iterations %d\n", r.steps, r.passes,
              r.newton_iterations, r.linear_iterations);
  std::printf("time: setup %.3f s, linear solve %.3f s, data handle %.3f s, total %.3f s\n", r.setup_seconds,
              r.linear_seconds, r.data_seconds, r.total_seconds);
  if (!res.rates.empty()) {
    const auto& last = res.rates.back();
    std::printf("day %g: cumulative oil %.6g ft3, water %.6g ft3; mass balance oil %.2e, water %.2e\n",
                last.time_days, last.cum_oil_ft3, last.cum_water_ft3, r.mass_balance_oil, r.mass_balance_water);
  }
  std::cout << "results in " << c.output_dir << "\n";
  return 0;
}

int upscale_command(const std::string& kx_path, const std::string& ky_path, int levels, const std::string& method,
                    const std::string& out_dir) {
  const Field2D kx = load_field(kx_path);
  const Field2D ky = ky_path.empty() ? kx : load_field(ky_path);
  const Field2D phi(kx.nx, kx.ny, 1.0);
  const RockField rock = build_rock_field(kx, ky, phi, UpscaleSpec{levels + 1, 2, parse_upscale_method(method)});
  auto stats = [](const Field2D& f) {
    double lo = f.values[0], hi = f.values[0], lg = 0;
    for (double v : f.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      lg += std::log(v);
    }
    return std::array<double, 3>{lo, std::exp(lg / static_cast<double>(f.size())), hi};
  };
  std::printf("%5s %9s %12s %12s %12s %12s %12s %12s\n", "level", "cells", "kx_min", "kx_geo", "kx_max", "ky_min",
              "ky_geo", "ky_max");
  for (int l = levels; l >= 0; --l) {
    const auto& fx = rock.kx[l];
    const auto& fy = rock.ky[l];
    const auto sx = stats(fx), sy = stats(fy);
    std::printf("%5d %4dx%-4d %12.6g %12.6g %12.6g %12.6g %12.6g %12.6g\n", l, fx.nx, fx.ny, sx[0], sx[1], sx[2], sy[0],
                sy[1], sy[2]);
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      save_field((fs::path(out_dir) / ("kx_level" + std::to_string(l) + ".txt")).string(), fx);
      save_field((fs::path(out_dir) / ("ky_level" + std::to_string(l) + ".txt")).string(), fy);
    }
  }
  return 0;
}

double rms(const std::vector<double>& d) {
  double s = 0;
  for (double v : d) s += v * v;
  return d.empty() ? 0.0 : std::sqrt(s / static_cast<double>(d.size()));
}

int compare_command(const fs::path& a, const fs::path& b) {
  const Field2D sa = load_field((a / "final_saturation.txt").string());
  const Field2D sb = load_field((b / "final_saturation.txt").string());
  if (sa.nx != sb.nx || sa.ny != sb.ny) throw IoError("final saturation fields have different dimensions");
  double num = 0, den = 0;
  for (std::size_t k = 0; k < sa.size(); ++k) {
    num += (sa.values[k] - sb.values[k]) * (sa.values[k] - sb.values[k]);
    den += sb.values[k] * sb.values[k];
  }
  const auto ra = read_rates_csv(a / "rates.csv"), rb = read_rates_csv(b / "rates.csv");
  if (ra.size() != rb.size()) throw IoError("rate tables have different lengths");
  std::vector<double> dqo, dqw;
  for (std::size_t k = 0; k < ra.size(); ++k) {
    if (std::abs(ra[k].time_days - rb[k].time_days) > 1e-9 * std::max(1.0, ra[k].time_days))
      throw IoError("rate tables have different output times");
    dqo.push_back(ra[k].qo_ft3_day - rb[k].qo_ft3_day);
    dqw.push_back(ra[k].qw_ft3_day - rb[k].qw_ft3_day);
  }
  const auto pa = read_report(a / "report.txt"), pb = read_report(b / "report.txt");
  auto seconds = [](const std::map<std::string, std::string>& rep, const std::string& key) {
    const auto it = rep.find(key);
    if (it == rep.end()) throw IoError("report lacks " + key);
    return std::stod(it->second);
  };
  std::printf("saturation_l2_relative %.6g\n", den > 0 ? std::sqrt(num / den) : std::sqrt(num));
  std::printf("oil_rate_rms_ft3_day %.6g\n", rms(dqo));
  std::printf("water_rate_rms_ft3_day %.6g\n", rms(dqw));
  std::printf("speedup_total %.4g\n", seconds(pb, "timing.total_seconds") / seconds(pa, "timing.total_seconds"));
  std::printf("speedup_linear_solve %.4g\n",
              seconds(pb, "timing.linear_solve_seconds") / seconds(pa, "timing.linear_solve_seconds"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space-time adaptive two-phase flow simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> mode, linear, out_dir;
  bool verbose = false;
  auto* run = app.add_subcommand("run", "Run a simulation from a config file");
  run->add_option("config", config_path, "Configuration file")->required();
  run->add_option("--mode", mode, "adaptive | fine | coarse")->check(CLI::IsMember({"adaptive", "fine", "coarse"}));
  run->add_option("--linear-solver", linear, "direct | gmres")->check(CLI::IsMember({"direct", "gmres"}));
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--verbose-indicators", verbose, "Write normalized indicator fields of every pass");

  std::string field, ky_field, method = "flow-based", up_out;
  int levels = 1;
  auto* up = app.add_subcommand("upscale", "Upscale a permeability field");
  up->add_option("field", field, "Kx field file")->required();
  up->add_option("--levels", levels, "Number of coarsening levels")->required()->check(CLI::Range(1, 16));
  up->add_option("--ky", ky_field, "Ky field file (default: Kx)");
  up->add_option("--method", method, "flow-based | harmonic-arithmetic")
      ->check(CLI::IsMember({"flow-based", "harmonic-arithmetic"}));
  up->add_option("--out", up_out, "Directory for the upscaled fields");

  std::string run_a, run_b;
  auto* cmp = app.add_subcommand("compare", "Compare two result directories (B is the reference)");
  cmp->add_option("runA", run_a, "Result directory")->required();
  cmp->add_option("runB", run_b, "Reference result directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) return run_command(config_path, mode, linear, out_dir, verbose);
    if (*up) return upscale_command(field, ky_field, levels, method, up_out);
    return compare_command(run_a, run_b);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const MeshError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  }
}
