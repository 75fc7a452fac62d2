// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: phantom generation, forward simulation,
// gradient checking, NWI/FWI inversion, evaluation, and map export.
// Verbs compose through the filesystem; every verb writes a manifest
// with the full effective config so a run can be reproduced exactly.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nwi/acquisition.hpp"
#include "nwi/config.hpp"
#include "nwi/fwi.hpp"
#include "nwi/io.hpp"
#include "nwi/phantom.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nwi;

namespace {

bool g_quiet = false;

void info(const std::string& msg) {
  if (!g_quiet) std::cout << msg << "\n";
}

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::int64_t seed_override = -1;
};

RunConfig load(const GlobalOpts& g) {
  RunConfig cfg = g.config_path.empty() ? config_from_json(json::object())
                                        : load_config(g.config_path);
  if (g.seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(g.seed_override);
  return cfg;
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg,
                    json extra) {
  json m;
  m["command"] = command;
  m["config"] = cfg.to_json();
  m["seed"] = cfg.seed;
  for (auto& [k, v] : extra.items()) m[k] = v;
  std::ofstream os(dir / "manifest.json");
  if (!os) throw IoError("cannot write manifest in " + dir.string());
  os << m.dump(2) << "\n";
}

const char* kMapNames[4] = {"sos", "density", "attenuation", "nonlinearity"};

void write_property_maps(const fs::path& dir, const PropertySet& props) {
  const Field* maps[4] = {&props.sos, &props.density, &props.attenuation, &props.nonlinearity};
  const MapKind kinds[4] = {MapKind::sos, MapKind::density, MapKind::attenuation,
                            MapKind::nonlinearity};
  for (int m = 0; m < 4; ++m)
    write_nwimap((dir / (std::string(kMapNames[m]) + ".nwim")).string(), *maps[m], kinds[m]);
}

PropertySet read_property_maps(const fs::path& dir) {
  Field maps[4];
  for (int m = 0; m < 4; ++m) {
    const fs::path p = dir / (std::string(kMapNames[m]) + ".nwim");
    if (!fs::exists(p)) throw MissingMap("missing " + std::string(kMapNames[m]) + " map: " +
                                         p.string());
    maps[m] = read_nwimap(p.string());
  }
  return PropertySet(std::move(maps[0]), std::move(maps[1]), std::move(maps[2]),
                     std::move(maps[3]));
}

int cmd_phantom(const GlobalOpts& g) {
  const RunConfig cfg = load(g);
  const SimulationGrid grid = cfg.make_grid();
  const PropertySet props = make_phantom(cfg.phantom, grid);
  fs::create_directories(g.out_dir);
  write_property_maps(g.out_dir, props);
  write_manifest(g.out_dir, "phantom", cfg,
                 {{"files", {"sos.nwim", "density.nwim", "attenuation.nwim",
                             "nonlinearity.nwim"}}});
  info("wrote 4 property maps to " + g.out_dir);
  return 0;
}

int cmd_simulate(const GlobalOpts& g, const std::string& props_dir, int snapshot_every) {
  const RunConfig cfg = load(g);
  const SimulationGrid grid = cfg.make_grid();
  const PmlConfig pml = cfg.make_pml();
  const ProbeGeometry geom = cfg.make_probe();
  const PropertySet props = read_property_maps(props_dir);
  if (props.nx() != grid.nx || props.nz() != grid.nz)
    throw ShapeMismatch("property maps in " + props_dir + " do not match grid.nx/grid.nz");

  try {
    check_cfl(props, grid);
  } catch (const CflViolation& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }

  fs::create_directories(g.out_dir);
  json emissions = json::array();
  for (int l = 0; l < cfg.plan.n_emissions; ++l) {
    const PulseField pulse = synthesize_focused(cfg.plan, geom, grid, l);
    const std::uint64_t seed = emission_seed(cfg.seed, l);
    ChannelData ch;
    if (snapshot_every > 0 && l == 0) {
      const Wavefield w = simulate_full(props, pulse, grid, pml, cfg.limits);
      for (int n = 0; n < grid.nt; n += snapshot_every) {
        char name[64];
        std::snprintf(name, sizeof(name), "snapshot_%05d.nwim", n);
        write_nwimap((fs::path(g.out_dir) / name).string(), w.slice_field(n), MapKind::generic);
      }
      ch = restrict_to_probe(w, geom, grid.dt);
    } else {
      ch = simulate_channels(props, pulse, grid, pml, geom, cfg.limits);
    }
    ch = add_noise(ch, cfg.snr, seed);
    char name[64];
    std::snprintf(name, sizeof(name), "emission_%03d.csv", l);
    write_csv_channels((fs::path(g.out_dir) / name).string(), ch);
    emissions.push_back({{"file", name}, {"noise_seed", seed}, {"emission_index", l}});
  }
  write_manifest(g.out_dir, "simulate", cfg, {{"emissions", emissions}});
  info("wrote " + std::to_string(cfg.plan.n_emissions) + " emission files to " + g.out_dir);
  return 0;
}

// Smooth heterogeneous maps around the water point, used as the gradient
// evaluation point.
Field gradcheck_map(int nx, int nz, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Field f(nx, nz);
  for (auto& v : f) v = dist(eng);
  Field tmp(nx, nz);
  for (int p = 0; p < 4; ++p) {
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nz; ++j) {
        const int im = std::max(i - 1, 0), ip = std::min(i + 1, nx - 1);
        const int jm = std::max(j - 1, 0), jp = std::min(j + 1, nz - 1);
        tmp(i, j) = 0.2 * (f(i, j) + f(im, j) + f(ip, j) + f(i, jm) + f(i, jp));
      }
    std::swap(f, tmp);
  }
  double mn = f.min(), mx = f.max();
  if (mx == mn) mx = mn + 1.0;
  for (auto& v : f) v = lo + (hi - lo) * (v - mn) / (mx - mn);
  return f;
}

int cmd_gradcheck(const GlobalOpts& g, bool corrupt) {
  const RunConfig cfg = load(g);
  const SimulationGrid grid = cfg.make_grid();
  const PmlConfig pml = cfg.make_pml();
  const ProbeGeometry geom = cfg.make_probe();
  PhysicsContext ctx;
  ctx.grid = grid;
  ctx.pml = pml;
  ctx.geom = geom;
  ctx.limits = cfg.limits;

  const PropertySet props(gradcheck_map(grid.nx, grid.nz, 1430, 1560, cfg.seed),
                          gradcheck_map(grid.nx, grid.nz, 950, 1080, cfg.seed + 1),
                          gradcheck_map(grid.nx, grid.nz, 100, 2000, cfg.seed + 2),
                          gradcheck_map(grid.nx, grid.nz, 1.0, 6.0, cfg.seed + 3));
  const PropertySet truth = make_phantom(cfg.phantom, grid);
  const PulseField pulse = synthesize_focused(cfg.plan, geom, grid, 0);
  const ChannelData measured =
      add_noise(simulate_channels(truth, pulse, grid, pml, geom, cfg.limits), cfg.snr,
                cfg.seed);

  auto [loss, grads] = loss_and_gradient(props, pulse, measured, cfg.loss, grid, pml, geom,
                                         cfg.limits, ctx.tape_budget_bytes);
  if (corrupt)
    for (auto& v : grads.d_sos) v *= 1.001;  // negative-control hook for tests

  struct Row {
    const char* name;
    const Field* grad;
    Field PropertySet::* map;
    double h;
  };
  const Row rows[4] = {{"sos", &grads.d_sos, &PropertySet::sos, 0.15},
                       {"density", &grads.d_density, &PropertySet::density, 0.1},
                       {"attenuation", &grads.d_attenuation, &PropertySet::attenuation, 20.0},
                       {"nonlinearity", &grads.d_nonlinearity, &PropertySet::nonlinearity, 0.1}};

  std::printf("%-14s %12s %12s %8s\n", "property", "max rel err", "mean rel err", "cells");
  bool ok = true;
  std::mt19937_64 eng(cfg.seed + 77);
  for (const auto& row : rows) {
    const double gmax = row.grad->max_abs();
    double worst = 0.0, sum = 0.0;
    int tested = 0, guard = 0;
    std::uniform_int_distribution<int> pick_i(0, grid.nx - 1), pick_j(0, grid.nz - 1);
    while (tested < 20 && guard++ < 20000) {
      const int i = pick_i(eng), j = pick_j(eng);
      if (gmax == 0.0) break;
      if (std::fabs((*row.grad)(i, j)) < 1e-3 * gmax) continue;
      auto at = [&](double off) {
        PropertySet p = props;
        (p.*(row.map))(i, j) += off;
        return total_loss(p, measured, pulse, cfg.loss, ctx);
      };
      const double h = row.h;
      const double fd = (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h);
      const double ad = (*row.grad)(i, j);
      const double err = std::fabs(fd - ad) / std::max({std::fabs(fd), std::fabs(ad), 1e-300});
      worst = std::max(worst, err);
      sum += err;
      ++tested;
    }
    if (gmax == 0.0) {
      // zero gradient field: FD of every sampled cell must also be zero
      worst = 0.0;
      tested = 20;
    }
    const bool pass = tested >= 20 && worst < 1e-5;
    ok = ok && pass;
    std::printf("%-14s %12.3e %12.3e %8d %s\n", row.name, worst,
                tested ? sum / tested : 0.0, tested, pass ? "PASS" : "FAIL");
  }
  return ok ? 0 : 1;
}

int cmd_invert(const GlobalOpts& g, const std::string& data_dir, const std::string& engine,
               bool linear_model) {
  const RunConfig cfg = load(g);
  const SimulationGrid grid = cfg.make_grid();
  const ProbeGeometry geom = cfg.make_probe();
  PhysicsContext ctx = cfg.make_context();

  // Load the dataset: manifest names the emission files and the plan was
  // snapshotted into the config section of the manifest.
  std::ifstream mf(fs::path(data_dir) / "manifest.json");
  if (!mf) throw IoError("missing dataset manifest: " + data_dir + "/manifest.json");
  json manifest;
  mf >> manifest;
  if (!manifest.contains("emissions")) throw IoError("dataset manifest has no emissions list");
  const RunConfig data_cfg = config_from_json(manifest["config"]);

  std::vector<Emission> dataset;
  for (const auto& e : manifest["emissions"]) {
    Emission em;
    const int l = e["emission_index"].get<int>();
    em.pulse = synthesize_focused(data_cfg.plan, geom, grid, l);
    em.measured =
        read_csv_channels((fs::path(data_dir) / e["file"].get<std::string>()).string(),
                          grid.dt);
    if (em.measured.nc != geom.nc() || em.measured.nt != grid.nt)
      throw ShapeMismatch("dataset " + e["file"].get<std::string>() +
                          " does not match probe.nc x grid.nt");
    em.noise_seed = e["noise_seed"].get<std::uint64_t>();
    dataset.push_back(std::move(em));
  }
  if (dataset.empty()) throw IoError("dataset manifest lists no emissions");

  // Water-style initialization from the phantom background.
  PropertySet init =
      PropertySet::uniform(grid.nx, grid.nz, cfg.phantom.background[0],
                           cfg.phantom.background[1], cfg.phantom.background[2],
                           linear_model ? 0.0 : cfg.phantom.background[3]);

  const int total_steps = cfg.outer_iterations * cfg.inner_steps;
  InversionConfig icfg = cfg.make_inversion_config(total_steps);
  if (linear_model) icfg.estimate_nonlinearity = false;

  RunLog log;
  PropertySet out = init;
  if (engine == "nwi") {
    out = multi_pulse_invert(dataset, init, icfg, ctx, &log);
  } else if (engine == "fwi") {
    // Matrix baseline (tiny grids): Algorithm-3-style rounds with the
    // matrix-form loop on each emission.
    if (grid.unknowns() > cfg.fwi_max_unknowns)
      throw ProblemTooLarge("engine=fwi: " + std::to_string(grid.unknowns()) +
                            " unknowns exceed solver.fwi_max_unknowns = " +
                            std::to_string(cfg.fwi_max_unknowns));
    PropertySet shared = init;
    for (int round = 0; round < cfg.outer_iterations; ++round) {
      std::vector<PropertySet> results;
      for (size_t l = 0; l < dataset.size(); ++l) {
        InversionConfig one = icfg;
        one.stop.max_iterations = cfg.inner_steps;
        one.stop.patience = 1 << 30;
        one.stop.grad_tol_rel = 0.0;
        RunLog wlog;
        results.push_back(fwi_invert(dataset[l].measured, dataset[l].pulse, shared, one, ctx,
                                     cfg.fwi_max_unknowns, &wlog));
        for (auto rec : wlog.iterations) {
          rec.round = round;
          rec.emission = static_cast<int>(l);
          log.iterations.push_back(rec);
        }
      }
      PropertySet avg = results[0];
      Field* maps[4] = {&avg.sos, &avg.density, &avg.attenuation, &avg.nonlinearity};
      for (size_t l = 1; l < results.size(); ++l) {
        const Field* add[4] = {&results[l].sos, &results[l].density, &results[l].attenuation,
                               &results[l].nonlinearity};
        for (int m = 0; m < 4; ++m)
          for (size_t k = 0; k < maps[m]->size(); ++k) (*maps[m])[k] += (*add[m])[k];
      }
      for (int m = 0; m < 4; ++m)
        for (size_t k = 0; k < maps[m]->size(); ++k)
          (*maps[m])[k] /= static_cast<double>(results.size());
      shared = std::move(avg);
    }
    out = std::move(shared);
    log.stop_reason = "outer_iterations";
  } else {
    throw ConfigError("invert: engine must be nwi or fwi");
  }

  fs::create_directories(g.out_dir);
  write_property_maps(g.out_dir, out);
  {
    std::ofstream os(fs::path(g.out_dir) / "loss_log.csv");
    os << "round,emission,step,loss\n";
    for (const auto& r : log.iterations)
      os << r.round << "," << r.emission << "," << r.step << "," << r.loss << "\n";
  }
  json losses = json::array();
  for (const auto& r : log.iterations) losses.push_back(r.loss);
  write_manifest(g.out_dir, "invert", cfg,
                 {{"engine", engine},
                  {"linear_model", linear_model},
                  {"data_dir", data_dir},
                  {"stop_reason", log.stop_reason},
                  {"losses", losses},
                  {"iterations", log.iterations.size()},
                  {"clamps",
                   {{"sos", log.clamps.sos},
                    {"density", log.clamps.density},
                    {"attenuation", log.clamps.attenuation},
                    {"nonlinearity", log.clamps.nonlinearity}}}});
  info("wrote reconstruction to " + g.out_dir + " (stop: " + log.stop_reason + ")");
  return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& est_dir, const std::string& truth_dir,
             bool include_pml, const std::string& json_out) {
  const RunConfig cfg = load(g);
  const PropertySet est = read_property_maps(est_dir);
  const PropertySet truth = read_property_maps(truth_dir);
  if (est.nx() != truth.nx() || est.nz() != truth.nz())
    throw ShapeMismatch("eval: estimate and truth map shapes differ");

  const int ring = include_pml ? 0 : cfg.pml_width;
  struct Row {
    const char* name;
    const Field* e;
    const Field* t;
    PropertyBounds b;
  };
  const Row rows[4] = {{"sos", &est.sos, &truth.sos, cfg.bounds.sos},
                       {"density", &est.density, &truth.density, cfg.bounds.density},
                       {"attenuation", &est.attenuation, &truth.attenuation,
                        cfg.bounds.attenuation},
                       {"nonlinearity", &est.nonlinearity, &truth.nonlinearity,
                        cfg.bounds.nonlinearity}};
  json out;
  out["command"] = "eval";
  out["config"] = cfg.to_json();
  out["est_dir"] = est_dir;
  out["truth_dir"] = truth_dir;
  out["include_pml"] = include_pml;
  std::printf("%-14s %10s\n", "property", "NRMSE");
  for (const auto& row : rows) {
    const double v = nrmse(crop_ring(*row.e, ring), crop_ring(*row.t, ring), row.b);
    std::printf("%-14s %10.6f\n", row.name, v);
    out["nrmse"][row.name] = v;
  }
  if (!json_out.empty()) {
    std::ofstream os(json_out);
    os << out.dump(2) << "\n";
  }
  return 0;
}

int cmd_export(const std::string& map_path, const std::string& out_path,
               const std::string& format, double lo, double hi) {
  const Field map = read_nwimap(map_path);
  MapFormat f;
  if (format == "csv")
    f = MapFormat::csv;
  else if (format == "pgm")
    f = MapFormat::pgm;
  else if (format == "nwimap")
    f = MapFormat::nwimap;
  else
    throw ConfigError("export: format must be csv, pgm or nwimap");
  export_map(map, PropertyBounds{lo, hi}, out_path, f);
  json m = {{"command", "export"}, {"map", map_path},    {"to", out_path},
            {"format", format},   {"min", lo},            {"max", hi}};
  std::ofstream os(out_path + ".manifest.json");
  os << m.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nonlinear waveform inversion toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "run configuration (JSON)");
  app.add_option("--seed", g.seed_override, "override noise.seed");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_flag("--quiet", g_quiet, "suppress progress output");

  auto* phantom = app.add_subcommand("phantom", "write the phantom property maps");

  auto* simulate = app.add_subcommand("simulate", "synthesize, propagate and record");
  std::string props_dir;
  int snapshot_every = 0;
  simulate->add_option("--props", props_dir, "directory with property maps")->required();
  simulate->add_option("--snapshots", snapshot_every,
                       "write every Nth wavefield slice of emission 0");

  auto* gradcheck = app.add_subcommand("gradcheck", "adjoint vs finite differences");
  bool corrupt = false;
  gradcheck->add_flag("--corrupt", corrupt, "negative control: corrupt the adjoint");

  auto* invert = app.add_subcommand("invert", "reconstruct properties from a dataset");
  std::string data_dir, engine = "nwi";
  bool linear_model = false;
  invert->add_option("--data", data_dir, "dataset directory (simulate output)")->required();
  invert->add_option("--engine", engine, "nwi or fwi")->check(CLI::IsMember({"nwi", "fwi"}));
  invert->add_flag("--linear", linear_model, "freeze the nonlinearity map at zero");

  auto* eval = app.add_subcommand("eval", "NRMSE of an estimate against the truth");
  std::string est_dir, truth_dir, json_out;
  bool include_pml = false;
  eval->add_option("--est", est_dir, "directory with estimated maps")->required();
  eval->add_option("--truth", truth_dir, "directory with ground-truth maps")->required();
  eval->add_flag("--include-pml", include_pml, "score the PML ring too");
  eval->add_option("--json", json_out, "also write the table as JSON");

  auto* exportc = app.add_subcommand("export", "convert a map file");
  std::string map_path, out_path, format = "csv";
  double lo = 0.0, hi = 1.0;
  exportc->add_option("--map", map_path, "input .nwim map")->required();
  exportc->add_option("--to", out_path, "output path")->required();
  exportc->add_option("--format", format, "csv, pgm or nwimap");
  exportc->add_option("--min", lo, "lower bound for pgm scaling");
  exportc->add_option("--max", hi, "upper bound for pgm scaling");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*phantom) return cmd_phantom(g);
    if (*simulate) return cmd_simulate(g, props_dir, snapshot_every);
    if (*gradcheck) return cmd_gradcheck(g, corrupt);
    if (*invert) return cmd_invert(g, data_dir, engine, linear_model);
    if (*eval) return cmd_eval(g, est_dir, truth_dir, include_pml, json_out);
    if (*exportc) return cmd_export(map_path, out_path, format, lo, hi);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
