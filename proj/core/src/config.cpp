// SPDX-License-Identifier: Apache-2.0
#include "nwi/config.hpp"

#include <cmath>
#include <fstream>

namespace nwi {

using nlohmann::json;

namespace {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  bool has(const std::string& key) const { return j_.contains(key); }

  Reader section(const std::string& key) const {
    if (!j_.contains(key)) return Reader(empty_, dotted(key));
    if (!j_[key].is_object()) throw ConfigError(dotted(key) + ": expected an object");
    return Reader(j_[key], dotted(key));
  }

  template <class T>
  T get(const std::string& key, T fallback) const {
    if (!j_.contains(key)) return fallback;
    try {
      return j_[key].get<T>();
    } catch (const json::exception&) {
      throw ConfigError(dotted(key) + ": wrong type");
    }
  }

  double get_positive(const std::string& key, double fallback) const {
    const double v = get<double>(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError(dotted(key) + ": must be a finite number > 0");
    return v;
  }

  double get_nonnegative(const std::string& key, double fallback) const {
    const double v = get<double>(key, fallback);
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ConfigError(dotted(key) + ": must be a finite number >= 0");
    return v;
  }

  int get_int_min(const std::string& key, int fallback, int min) const {
    const int v = get<int>(key, fallback);
    if (v < min)
      throw ConfigError(dotted(key) + ": must be >= " + std::to_string(min));
    return v;
  }

  std::string dotted(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& raw() const { return j_; }

 private:
  static const json empty_;
  const json& j_;
  std::string path_;
};

const json Reader::empty_ = json::object();

PropertyTuple read_tuple(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 4)
    throw ConfigError(path + ": expected [sos, density, attenuation, nonlinearity]");
  PropertyTuple t{};
  for (int m = 0; m < 4; ++m) {
    if (!j[m].is_number()) throw ConfigError(path + ": entries must be numbers");
    t[m] = j[m].get<double>();
  }
  if (!(t[0] > 0.0) || !(t[1] > 0.0) || t[2] < 0.0 || t[3] < 0.0)
    throw ConfigError(path + ": violates property bounds (sos,density > 0; others >= 0)");
  return t;
}

PhantomSpec preset_phantom(const std::string& name, double extent_x, double extent_z,
                           const std::string& path) {
  PhantomSpec spec;
  spec.extent_x = extent_x;
  spec.extent_z = extent_z;
  if (name == "water") {
    spec.background = tissue_preset("water");
    return spec;
  }
  if (name == "water-physical") {
    spec.background = tissue_preset("water-physical");
    return spec;
  }
  if (name == "two-inclusion") {
    spec.background = tissue_preset("water");
    Inclusion fat;
    fat.shape = Inclusion::Shape::ellipse;
    fat.x0 = 0.52 * extent_x;
    fat.z0 = 0.30 * extent_z;
    fat.ax = 0.16 * extent_x;
    fat.az = 0.13 * extent_z;
    fat.properties = tissue_preset("fat");
    Inclusion liver;
    liver.shape = Inclusion::Shape::ellipse;
    liver.x0 = 0.50 * extent_x;
    liver.z0 = 0.70 * extent_z;
    liver.ax = 0.13 * extent_x;
    liver.az = 0.15 * extent_z;
    liver.properties = tissue_preset("liver");
    spec.inclusions = {fat, liver};
    return spec;
  }
  throw ConfigError(path + ": unknown preset '" + name + "'");
}

}  // namespace

PropertyTuple tissue_preset(const std::string& name) {
  // Water sos/density and the fat nonlinearity follow the usual quoted
  // values; fat/liver sos, density and attenuation are handbook-style
  // approximations, shipped as presets rather than ground truth.
  if (name == "water") return {1480.0, 1000.0, 0.0, 0.0};
  if (name == "water-physical") return {1480.0, 1000.0, 0.0, 3.5};
  if (name == "fat") return {1450.0, 950.0, 8e3, 6.0};
  if (name == "liver") return {1570.0, 1060.0, 5e3, 6.8};
  throw ConfigError("unknown tissue preset '" + name + "'");
}

RunConfig config_from_json(const json& root) {
  if (!root.is_object()) throw ConfigError("config root must be an object");
  Reader r(root, "");
  RunConfig c;

  {
    Reader g = r.section("grid");
    c.nx = g.get_int_min("nx", c.nx, 3);
    c.nz = g.get_int_min("nz", c.nz, 3);
    c.nt = g.get_int_min("nt", c.nt, 3);
    c.dx = g.get_positive("dx", c.dx);
    c.dt = g.get_positive("dt", c.dt);
  }
  {
    Reader p = r.section("pml");
    c.pml_width = p.get_int_min("width", c.pml_width, 0);
    if (p.has("d_max")) {
      if (p.raw()["d_max"].is_string()) {
        if (p.raw()["d_max"].get<std::string>() != "auto")
          throw ConfigError("pml.d_max: expected a number or \"auto\"");
        c.pml_d_max = -1.0;
      } else {
        c.pml_d_max = p.get_nonnegative("d_max", 0.0);
      }
    }
    if (2 * c.pml_width >= std::min(c.nx, c.nz))
      throw ConfigError("pml.width: 2*width must be < min(grid.nx, grid.nz)");
  }
  {
    Reader p = r.section("probe");
    c.probe_nc = p.get_int_min("nc", c.probe_nc, 1);
    c.probe_pitch_cells = p.get_int_min("pitch_cells", c.probe_pitch_cells, 1);
    c.probe_row = p.get<int>("row", -1);
    c.probe_first_col = p.get<int>("first_col", -1);
    const int span = (c.probe_nc - 1) * c.probe_pitch_cells + 1;
    if (span > c.nz) throw ConfigError("probe.nc: array span exceeds grid.nz");
    const int row = c.probe_row < 0 ? c.pml_width : c.probe_row;
    if (row >= c.nx) throw ConfigError("probe.row: outside the grid");
  }
  {
    Reader p = r.section("plan");
    c.plan.n_emissions = p.get_int_min("n_emissions", c.plan.n_emissions, 1);
    c.plan.aperture_elements = p.get_int_min("aperture", c.plan.aperture_elements, 1);
    c.plan.stride_elements = p.get_int_min("stride", c.plan.stride_elements, 0);
    c.plan.waveform.f0 = p.get_positive("f0", c.plan.waveform.f0);
    c.plan.waveform.cycles = p.get_positive("cycles", c.plan.waveform.cycles);
    c.plan.waveform.amplitude = p.get_nonnegative("amplitude", c.plan.waveform.amplitude);
    c.plan.focus_depth = p.get_positive("focus_depth", c.plan.focus_depth);
    c.plan.assumed_sos = p.get_positive("assumed_sos", c.plan.assumed_sos);
    try {
      c.plan.validate(c.probe_nc, c.dt);
    } catch (const Error& e) {
      throw ConfigError(std::string("plan: ") + e.what());
    }
  }
  {
    Reader p = r.section("noise");
    if (p.has("snr")) {
      const json& s = p.raw()["snr"];
      if (s.is_string()) {
        if (s.get<std::string>() != "inf")
          throw ConfigError("noise.snr: expected a number or \"inf\"");
        c.snr = std::numeric_limits<double>::infinity();
      } else {
        double v = p.get_positive("snr", 20.0);
        const std::string units = p.get<std::string>("units", "linear");
        if (units == "db")
          v = std::pow(10.0, v / 10.0);
        else if (units != "linear")
          throw ConfigError("noise.units: expected \"linear\" or \"db\"");
        c.snr = v;
      }
    }
    c.seed = p.get<std::uint64_t>("seed", c.seed);
  }
  {
    Reader p = r.section("loss");
    c.loss.lambda_sos = p.get_nonnegative("lambda_sos", c.loss.lambda_sos);
    c.loss.lambda_density = p.get_nonnegative("lambda_density", c.loss.lambda_density);
    c.loss.lambda_attenuation =
        p.get_nonnegative("lambda_attenuation", c.loss.lambda_attenuation);
    c.loss.lambda_nonlinearity =
        p.get_nonnegative("lambda_nonlinearity", c.loss.lambda_nonlinearity);
  }
  {
    Reader p = r.section("optimizer");
    const std::string kind = p.get<std::string>("kind", "adam");
    if (kind == "gd")
      c.optimizer = OptimizerKind::gd;
    else if (kind == "adam")
      c.optimizer = OptimizerKind::adam;
    else
      throw ConfigError("optimizer.kind: expected \"gd\" or \"adam\"");
    Reader rr = p.section("rates");
    c.rates.sos = rr.get_positive("sos", c.rates.sos);
    c.rates.density = rr.get_positive("density", c.rates.density);
    c.rates.attenuation = rr.get_positive("attenuation", c.rates.attenuation);
    c.rates.nonlinearity = rr.get_positive("nonlinearity", c.rates.nonlinearity);
    c.adam.beta1 = p.get_positive("beta1", c.adam.beta1);
    c.adam.beta2 = p.get_positive("beta2", c.adam.beta2);
    c.adam.eps = p.get_positive("eps", c.adam.eps);
    if (c.adam.beta1 >= 1.0 || c.adam.beta2 >= 1.0)
      throw ConfigError("optimizer.beta1/beta2: must be < 1");
  }
  {
    Reader p = r.section("schedule");
    c.k1_fraction = p.get_nonnegative("k1_fraction", c.k1_fraction);
    if (c.k1_fraction > 1.0) throw ConfigError("schedule.k1_fraction: must be in [0, 1]");
    c.schedule_cycle = p.get_int_min("cycle", c.schedule_cycle, 0);
    c.mask_threshold = p.get_positive("mask_threshold", c.mask_threshold);
    c.water_density = p.get_positive("water_density", c.water_density);
    c.inner_steps = p.get_int_min("inner_steps", c.inner_steps, 1);
    c.outer_iterations = p.get_int_min("outer_iterations", c.outer_iterations, 0);
    c.workers = p.get_int_min("workers", c.workers, 1);
    c.estimate_nonlinearity = p.get<bool>("estimate_nonlinearity", c.estimate_nonlinearity);
  }
  {
    Reader p = r.section("stop");
    c.stop.max_iterations = p.get_int_min("max_iterations", c.stop.max_iterations, 0);
    c.stop.plateau_tol = p.get_nonnegative("plateau_tol", c.stop.plateau_tol);
    c.stop.patience = p.get_int_min("patience", c.stop.patience, 0);
    c.stop.grad_tol_rel = p.get_nonnegative("grad_tol_rel", c.stop.grad_tol_rel);
  }
  {
    Reader p = r.section("bounds");
    auto read_bounds = [&](const char* key, PropertyBounds& b) {
      if (!p.has(key)) return;
      const json& a = p.raw()[key];
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
        throw ConfigError(p.dotted(key) + ": expected [min, max]");
      b.min = a[0].get<double>();
      b.max = a[1].get<double>();
      if (!(b.max > b.min)) throw ConfigError(p.dotted(key) + ": max must exceed min");
    };
    read_bounds("sos", c.bounds.sos);
    read_bounds("density", c.bounds.density);
    read_bounds("attenuation", c.bounds.attenuation);
    read_bounds("nonlinearity", c.bounds.nonlinearity);
  }
  {
    Reader p = r.section("phantom");
    const double ex = c.nx * c.dx, ez = c.nz * c.dx;
    if (p.has("preset")) {
      c.phantom = preset_phantom(p.get<std::string>("preset", ""), ex, ez, "phantom.preset");
    } else {
      c.phantom.extent_x = ex;
      c.phantom.extent_z = ez;
      c.phantom.background = p.has("background")
                                 ? read_tuple(p.raw()["background"], "phantom.background")
                                 : tissue_preset("water");
      if (p.has("inclusions")) {
        const json& arr = p.raw()["inclusions"];
        if (!arr.is_array()) throw ConfigError("phantom.inclusions: expected an array");
        int idx = 0;
        for (const auto& e : arr) {
          const std::string path = "phantom.inclusions[" + std::to_string(idx++) + "]";
          Inclusion inc;
          const std::string shape = e.value("shape", "ellipse");
          if (shape == "ellipse")
            inc.shape = Inclusion::Shape::ellipse;
          else if (shape == "rectangle")
            inc.shape = Inclusion::Shape::rectangle;
          else
            throw ConfigError(path + ".shape: expected \"ellipse\" or \"rectangle\"");
          if (!e.contains("x0") || !e.contains("z0") || !e.contains("ax") || !e.contains("az"))
            throw ConfigError(path + ": needs x0, z0, ax, az");
          inc.x0 = e["x0"].get<double>();
          inc.z0 = e["z0"].get<double>();
          inc.ax = e["ax"].get<double>();
          inc.az = e["az"].get<double>();
          if (e.contains("properties"))
            inc.properties = read_tuple(e["properties"], path + ".properties");
          else if (e.contains("preset"))
            inc.properties = tissue_preset(e["preset"].get<std::string>());
          else
            throw ConfigError(path + ": needs properties or preset");
          c.phantom.inclusions.push_back(inc);
        }
      }
    }
  }
  {
    Reader p = r.section("solver");
    c.limits.field_cap = p.get_positive("field_cap", c.limits.field_cap);
    c.limits.g1_floor_scale = p.get_positive("g1_floor_scale", c.limits.g1_floor_scale);
    c.tape_budget_mb = p.get<std::uint64_t>("tape_budget_mb", c.tape_budget_mb);
    c.fwi_max_unknowns = p.get<std::uint64_t>("fwi_max_unknowns", c.fwi_max_unknowns);
    c.checkpointing = p.get<std::string>("checkpointing", c.checkpointing);
    if (c.checkpointing != "none")
      throw ConfigError("solver.checkpointing: only \"none\" is implemented");
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

SimulationGrid RunConfig::make_grid() const { return SimulationGrid(nx, nz, nt, dx, dt); }

PmlConfig RunConfig::make_pml() const {
  PmlConfig p;
  p.width_cells = pml_width;
  p.d_max = pml_d_max >= 0.0 ? pml_d_max
                             : suggested_pml_dmax(plan.assumed_sos, pml_width, dx, dt);
  return p;
}

ProbeGeometry RunConfig::make_probe() const {
  const int row = probe_row < 0 ? pml_width : probe_row;
  const int span = (probe_nc - 1) * probe_pitch_cells + 1;
  const int first = probe_first_col < 0 ? (nz - span) / 2 : probe_first_col;
  ProbeGeometry g = ProbeGeometry::linear(row, first, probe_nc, probe_pitch_cells);
  g.validate_inside(nx, nz);
  return g;
}

PhysicsContext RunConfig::make_context() const {
  PhysicsContext ctx;
  ctx.grid = make_grid();
  ctx.pml = make_pml();
  ctx.geom = make_probe();
  ctx.limits = limits;
  ctx.tape_budget_bytes = static_cast<size_t>(tape_budget_mb) << 20;
  return ctx;
}

InversionConfig RunConfig::make_inversion_config(int total_steps) const {
  InversionConfig ic;
  ic.loss = loss;
  ic.optimizer = optimizer;
  ic.rates = rates;
  ic.adam = adam;
  ic.bounds = phys_bounds;
  ic.schedule.cycle_steps = schedule_cycle;
  const int span = schedule_cycle > 0 ? schedule_cycle : total_steps;
  ic.schedule.k1_iters = static_cast<int>(std::ceil(k1_fraction * span));
  ic.schedule.mask_threshold = mask_threshold;
  ic.schedule.water_density = water_density;
  ic.stop = stop;
  ic.inner_steps = inner_steps;
  ic.outer_iterations = outer_iterations;
  ic.workers = workers;
  ic.estimate_nonlinearity = estimate_nonlinearity;
  return ic;
}

json RunConfig::to_json() const {
  json j;
  j["grid"] = {{"nx", nx}, {"nz", nz}, {"nt", nt}, {"dx", dx}, {"dt", dt}};
  j["pml"] = {{"width", pml_width}, {"d_max", make_pml().d_max}};
  j["probe"] = {{"nc", probe_nc},
                {"pitch_cells", probe_pitch_cells},
                {"row", probe_row < 0 ? pml_width : probe_row},
                {"first_col", make_probe().element_cells.front().second}};
  j["plan"] = {{"n_emissions", plan.n_emissions}, {"aperture", plan.aperture_elements},
               {"stride", plan.stride_elements},  {"f0", plan.waveform.f0},
               {"cycles", plan.waveform.cycles},  {"amplitude", plan.waveform.amplitude},
               {"focus_depth", plan.focus_depth}, {"assumed_sos", plan.assumed_sos}};
  if (std::isinf(snr))
    j["noise"] = {{"snr", "inf"}, {"seed", seed}};
  else
    j["noise"] = {{"snr", snr}, {"units", "linear"}, {"seed", seed}};
  j["loss"] = {{"lambda_sos", loss.lambda_sos},
               {"lambda_density", loss.lambda_density},
               {"lambda_attenuation", loss.lambda_attenuation},
               {"lambda_nonlinearity", loss.lambda_nonlinearity}};
  j["optimizer"] = {{"kind", optimizer == OptimizerKind::gd ? "gd" : "adam"},
                    {"rates",
                     {{"sos", rates.sos},
                      {"density", rates.density},
                      {"attenuation", rates.attenuation},
                      {"nonlinearity", rates.nonlinearity}}},
                    {"beta1", adam.beta1},
                    {"beta2", adam.beta2},
                    {"eps", adam.eps}};
  j["schedule"] = {{"k1_fraction", k1_fraction},     {"cycle", schedule_cycle},     {"mask_threshold", mask_threshold},
                   {"water_density", water_density}, {"inner_steps", inner_steps},
                   {"outer_iterations", outer_iterations}, {"workers", workers},
                   {"estimate_nonlinearity", estimate_nonlinearity}};
  j["stop"] = {{"max_iterations", stop.max_iterations},
               {"plateau_tol", stop.plateau_tol},
               {"patience", stop.patience},
               {"grad_tol_rel", stop.grad_tol_rel}};
  j["bounds"] = {{"sos", {bounds.sos.min, bounds.sos.max}},
                 {"density", {bounds.density.min, bounds.density.max}},
                 {"attenuation", {bounds.attenuation.min, bounds.attenuation.max}},
                 {"nonlinearity", {bounds.nonlinearity.min, bounds.nonlinearity.max}}};
  json incs = json::array();
  for (const auto& inc : phantom.inclusions) {
    incs.push_back({{"shape", inc.shape == Inclusion::Shape::ellipse ? "ellipse" : "rectangle"},
                    {"x0", inc.x0},
                    {"z0", inc.z0},
                    {"ax", inc.ax},
                    {"az", inc.az},
                    {"properties", inc.properties}});
  }
  j["phantom"] = {{"extent_x", phantom.extent_x},
                  {"extent_z", phantom.extent_z},
                  {"background", phantom.background},
                  {"inclusions", incs}};
  j["solver"] = {{"field_cap", limits.field_cap},
                 {"g1_floor_scale", limits.g1_floor_scale},
                 {"tape_budget_mb", tape_budget_mb},
                 {"fwi_max_unknowns", fwi_max_unknowns},
                 {"checkpointing", checkpointing}};
  return j;
}

}  // namespace nwi
