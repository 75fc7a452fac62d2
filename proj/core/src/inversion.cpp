// SPDX-License-Identifier: Apache-2.0
#include "nwi/inversion.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

#include "nwi/fwi.hpp"

namespace nwi {

OptimizerState::OptimizerState(OptimizerKind kind, LearningRates rates, AdamParams adam, int nx,
                               int nz)
    : kind_(kind), rates_(rates), adam_(adam) {
  if (!(rates.sos > 0.0 && rates.density > 0.0 && rates.attenuation > 0.0 &&
        rates.nonlinearity > 0.0))
    throw InvalidProperty("optimizer: learning rates must be > 0");
  if (kind == OptimizerKind::adam) {
    for (Moments* m : {&m_sos_, &m_density_, &m_attenuation_, &m_nonlinearity_}) {
      m->m = Field(nx, nz, 0.0);
      m->v = Field(nx, nz, 0.0);
    }
  }
}

void OptimizerState::update_map(Field& map, const Field& grad, Moments& mom, double rate,
                                const Mask* mask) {
  if (kind_ == OptimizerKind::gd) {
    for (size_t k = 0; k < map.size(); ++k)
      if (!mask || (*mask)[k]) map[k] -= rate * grad[k];
    return;
  }
  mom.t += 1;
  const double bc1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(mom.t));
  const double bc2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(mom.t));
  for (size_t k = 0; k < map.size(); ++k) {
    if (mask && !(*mask)[k]) continue;
    mom.m[k] = adam_.beta1 * mom.m[k] + (1.0 - adam_.beta1) * grad[k];
    mom.v[k] = adam_.beta2 * mom.v[k] + (1.0 - adam_.beta2) * grad[k] * grad[k];
    const double mhat = mom.m[k] / bc1;
    const double vhat = mom.v[k] / bc2;
    map[k] -= rate * mhat / (std::sqrt(vhat) + adam_.eps);
  }
}

ClampCounts OptimizerState::step(PropertySet& props, const PropertyGradients& grads,
                                 const ActiveSet& active, const Mask* mask,
                                 const PhysicalBounds& bounds) {
  auto check = [](bool on, const Field& g, const char* name) {
    if (on && !g.all_finite())
      throw NonFiniteGradient(std::string("optimizer: non-finite gradient for ") + name);
  };
  check(active.sos, grads.d_sos, "sos");
  check(active.density, grads.d_density, "density");
  check(active.attenuation, grads.d_attenuation, "attenuation");
  check(active.nonlinearity, grads.d_nonlinearity, "nonlinearity");

  if (active.sos) update_map(props.sos, grads.d_sos, m_sos_, rates_.sos, mask);
  if (active.density) update_map(props.density, grads.d_density, m_density_, rates_.density, mask);
  if (active.attenuation)
    update_map(props.attenuation, grads.d_attenuation, m_attenuation_, rates_.attenuation, mask);
  if (active.nonlinearity)
    update_map(props.nonlinearity, grads.d_nonlinearity, m_nonlinearity_, rates_.nonlinearity,
               mask);

  ClampCounts clamps;
  auto clamp_floor = [](Field& f, double floor, std::int64_t& count) {
    for (size_t k = 0; k < f.size(); ++k)
      if (f[k] < floor) {
        f[k] = floor;
        ++count;
      }
  };
  if (active.sos) clamp_floor(props.sos, bounds.sos_floor, clamps.sos);
  if (active.density) clamp_floor(props.density, bounds.density_floor, clamps.density);
  if (active.attenuation) clamp_floor(props.attenuation, 0.0, clamps.attenuation);
  if (active.nonlinearity) clamp_floor(props.nonlinearity, 0.0, clamps.nonlinearity);
  return clamps;
}

Mask tissue_mask(const Field& density_est, double water_density, double threshold) {
  if (!(water_density > 0.0)) throw InvalidProperty("tissue_mask: water_density must be > 0");
  const int nx = density_est.nx(), nz = density_est.nz();
  Mask raw(nx, nz);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nz; ++j)
      raw.set(i, j, std::fabs(density_est(i, j) - water_density) / water_density > threshold);

  Mask out(nx, nz);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nz; ++j) {
      bool on = raw(i, j);
      if (!on && i > 0) on = raw(i - 1, j);
      if (!on && i < nx - 1) on = raw(i + 1, j);
      if (!on && j > 0) on = raw(i, j - 1);
      if (!on && j < nz - 1) on = raw(i, j + 1);
      out.set(i, j, on);
    }
  }
  return out;
}

double total_loss(const PropertySet& props, const ChannelData& measured, const PulseField& pulse,
                  const LossConfig& loss_cfg, const PhysicsContext& ctx) {
  const ChannelData pred =
      simulate_channels(props, pulse, ctx.grid, ctx.pml, ctx.geom, ctx.limits);
  if (pred.nc != measured.nc || pred.nt != measured.nt)
    throw ShapeMismatch("total_loss: measured data shape mismatch");
  double sq = 0.0;
  for (size_t k = 0; k < pred.samples.size(); ++k) {
    const double r = pred.samples[k] - measured.samples[k];
    sq += r * r;
  }
  double loss = std::sqrt(sq);
  loss += loss_cfg.lambda_sos * sobel_penalty(props.sos);
  loss += loss_cfg.lambda_density * sobel_penalty(props.density);
  loss += loss_cfg.lambda_attenuation * sobel_penalty(props.attenuation);
  loss += loss_cfg.lambda_nonlinearity * sobel_penalty(props.nonlinearity);
  return loss;
}

namespace {

struct StepOutcome {
  double loss = 0.0;
  double grad_inf_active = 0.0;
  ClampCounts clamps;
};

// One Algorithm-2 step under the stage schedule; shared by the
// single-pulse loop and the multi-pulse workers so that both produce the
// same bits for the same inputs.
StepOutcome schedule_step(PropertySet& props, OptimizerState& opt, const ChannelData& measured,
                          const PulseField& pulse, const InversionConfig& cfg,
                          const PhysicsContext& ctx, int global_step) {
  ActiveSet active;
  Mask mask;
  const Mask* mask_ptr = nullptr;
  const int phase_pos = cfg.schedule.cycle_steps > 0
                            ? global_step % cfg.schedule.cycle_steps
                            : global_step;
  if (phase_pos < cfg.schedule.k1_iters) {
    active.sos = active.density = true;
  } else {
    active.attenuation = true;
    active.nonlinearity = cfg.estimate_nonlinearity;
    mask = tissue_mask(props.density, cfg.schedule.water_density, cfg.schedule.mask_threshold);
    mask_ptr = &mask;
  }

  auto [loss, grads] = loss_and_gradient(props, pulse, measured, cfg.loss, ctx.grid, ctx.pml,
                                         ctx.geom, ctx.limits, ctx.tape_budget_bytes);

  StepOutcome out;
  out.loss = loss;
  if (active.sos) out.grad_inf_active = std::max(out.grad_inf_active, grads.d_sos.max_abs());
  if (active.density)
    out.grad_inf_active = std::max(out.grad_inf_active, grads.d_density.max_abs());
  if (active.attenuation)
    out.grad_inf_active = std::max(out.grad_inf_active, grads.d_attenuation.max_abs());
  if (active.nonlinearity)
    out.grad_inf_active = std::max(out.grad_inf_active, grads.d_nonlinearity.max_abs());

  out.clamps = opt.step(props, grads, active, mask_ptr, cfg.bounds);

  try {
    check_cfl(props, ctx.grid);
  } catch (const CflViolation& e) {
    throw CflViolation(e.cr, std::string(e.what()) + " (after update at step " +
                                 std::to_string(global_step) + ")");
  }
  return out;
}

void accumulate(ClampCounts& into, const ClampCounts& c) {
  into.sos += c.sos;
  into.density += c.density;
  into.attenuation += c.attenuation;
  into.nonlinearity += c.nonlinearity;
}

}  // namespace

PropertySet nwi_invert(const ChannelData& measured, const PulseField& pulse,
                       const PropertySet& init_props, const InversionConfig& cfg,
                       const PhysicsContext& ctx, RunLog* log) {
  check_cfl(init_props, ctx.grid);
  PropertySet props = init_props;
  OptimizerState opt(cfg.optimizer, cfg.rates, cfg.adam, ctx.grid.nx, ctx.grid.nz);

  std::vector<double> losses;
  double init_grad_inf = -1.0;
  std::string stop_reason = "max_iterations";

  for (int it = 0; it < cfg.stop.max_iterations; ++it) {
    const StepOutcome o = schedule_step(props, opt, measured, pulse, cfg, ctx, it);
    losses.push_back(o.loss);
    if (log) {
      log->iterations.push_back({0, 0, it, o.loss});
      accumulate(log->clamps, o.clamps);
    }
    if (init_grad_inf < 0.0) init_grad_inf = o.grad_inf_active;
    if (o.grad_inf_active < cfg.stop.grad_tol_rel * init_grad_inf) {
      stop_reason = "gradient_norm";
      break;
    }
    const int p = cfg.stop.patience;
    if (p > 0 && static_cast<int>(losses.size()) > p) {
      const double before = losses[losses.size() - 1 - p];
      const double decrease = (before - losses.back()) / std::max(std::fabs(before), 1e-300);
      if (decrease < cfg.stop.plateau_tol) {
        stop_reason = "loss_plateau";
        break;
      }
    }
  }
  if (log) log->stop_reason = stop_reason;
  return props;
}

PropertySet multi_pulse_invert(const std::vector<Emission>& dataset,
                               const PropertySet& init_props, const InversionConfig& cfg,
                               const PhysicsContext& ctx, RunLog* log) {
  if (dataset.empty()) throw InvalidGeometry("multi_pulse_invert: need at least one emission");
  check_cfl(init_props, ctx.grid);

  const int nl = static_cast<int>(dataset.size());
  const int workers = std::max(1, std::min(cfg.workers, nl));

  PropertySet shared = init_props;
  std::vector<OptimizerState> states;
  states.reserve(nl);
  for (int l = 0; l < nl; ++l)
    states.emplace_back(cfg.optimizer, cfg.rates, cfg.adam, ctx.grid.nx, ctx.grid.nz);

  for (int round = 0; round < cfg.outer_iterations; ++round) {
    std::vector<PropertySet> results(nl);
    std::vector<std::vector<IterationRecord>> logs(nl);
    std::vector<ClampCounts> clamps(nl);
    std::vector<std::exception_ptr> errors(nl);

    std::atomic<int> next{0};
    auto work = [&]() {
      for (;;) {
        const int l = next.fetch_add(1);
        if (l >= nl) return;
        try {
          PropertySet local = shared;
          for (int k = 0; k < cfg.inner_steps; ++k) {
            const int step = round * cfg.inner_steps + k;
            const StepOutcome o =
                schedule_step(local, states[l], dataset[l].measured, dataset[l].pulse, cfg, ctx,
                              step);
            logs[l].push_back({round, l, step, o.loss});
            accumulate(clamps[l], o.clamps);
          }
          results[l] = std::move(local);
        } catch (...) {
          errors[l] = std::current_exception();
        }
      }
    };

    if (workers == 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(workers);
      for (int w = 0; w < workers; ++w) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }

    for (int l = 0; l < nl; ++l) {
      if (errors[l]) {
        try {
          std::rethrow_exception(errors[l]);
        } catch (const std::exception& e) {
          throw Error("multi_pulse_invert: worker " + std::to_string(l) + " failed in round " +
                      std::to_string(round) + ": " + e.what());
        }
      }
    }

    // Barrier then elementwise average in fixed emission order.
    PropertySet avg = results[0];
    if (nl > 1) {
      Field* maps[4] = {&avg.sos, &avg.density, &avg.attenuation, &avg.nonlinearity};
      for (int l = 1; l < nl; ++l) {
        const Field* add[4] = {&results[l].sos, &results[l].density, &results[l].attenuation,
                               &results[l].nonlinearity};
        for (int m = 0; m < 4; ++m)
          for (size_t k = 0; k < maps[m]->size(); ++k) (*maps[m])[k] += (*add[m])[k];
      }
      const double inv = 1.0 / nl;
      for (int m = 0; m < 4; ++m)
        for (size_t k = 0; k < maps[m]->size(); ++k) (*maps[m])[k] *= inv;
    }
    shared = std::move(avg);

    if (log) {
      for (int l = 0; l < nl; ++l) {
        log->iterations.insert(log->iterations.end(), logs[l].begin(), logs[l].end());
        accumulate(log->clamps, clamps[l]);
      }
    }
  }
  if (log) log->stop_reason = "outer_iterations";
  return shared;
}

PropertySet fwi_invert(const ChannelData& measured, const PulseField& pulse,
                       const PropertySet& init_props, const InversionConfig& cfg,
                       const PhysicsContext& ctx, size_t max_unknowns, RunLog* log) {
  check_cfl(init_props, ctx.grid);
  if (ctx.grid.unknowns() > max_unknowns)
    throw ProblemTooLarge("fwi_invert: " + std::to_string(ctx.grid.unknowns()) +
                          " unknowns exceed the cap " + std::to_string(max_unknowns));
  ctx.geom.validate_inside(ctx.grid.nx, ctx.grid.nz);

  PropertySet props = init_props;
  OptimizerState opt(cfg.optimizer, cfg.rates, cfg.adam, ctx.grid.nx, ctx.grid.nz);
  const Field pml_map = pml_profile(ctx.grid, ctx.pml);
  const std::vector<double> f = pulse_to_vector(pulse, ctx.grid);
  const size_t cells = ctx.grid.cells();

  std::vector<double> losses;
  double init_grad_inf = -1.0;
  std::string stop_reason = "max_iterations";

  for (int it = 0; it < cfg.stop.max_iterations; ++it) {
    const Field d_eff = effective_attenuation(props.attenuation, pml_map);
    const LinearWaveOperator A =
        assemble_linear(props.sos, props.density, d_eff, ctx.grid, max_unknowns);
    const std::vector<double> u = solve_wavefield(A, f);

    ChannelData res(ctx.geom.nc(), ctx.grid.nt, ctx.grid.dt);
    double sq = 0.0;
    for (int j = 0; j < ctx.geom.nc(); ++j) {
      const auto [ri, cj] = ctx.geom.element_cells[j];
      const size_t cell = static_cast<size_t>(ri) * ctx.grid.nz + cj;
      for (int n = 0; n < ctx.grid.nt; ++n) {
        const double r = u[static_cast<size_t>(n) * cells + cell] - measured.at(j, n);
        res.at(j, n) = r;
        sq += r * r;
      }
    }
    const double dnorm = std::sqrt(sq);
    double loss = dnorm;
    loss += cfg.loss.lambda_sos * sobel_penalty(props.sos);
    loss += cfg.loss.lambda_density * sobel_penalty(props.density);
    loss += cfg.loss.lambda_attenuation * sobel_penalty(props.attenuation);

    PropertyGradients g(ctx.grid.nx, ctx.grid.nz);
    if (dnorm > 0.0) {
      const FwiGradients fg = fwi_gradient(A, u, res, ctx.geom, props.sos, props.density, d_eff);
      for (size_t k = 0; k < cells; ++k) {
        g.d_sos[k] = fg.d_sos[k] / dnorm;
        g.d_density[k] = fg.d_density[k] / dnorm;
        g.d_attenuation[k] = fg.d_attenuation[k] / dnorm;
      }
    }
    auto add_reg = [&](double lambda, const Field& map, Field& grad) {
      if (lambda == 0.0) return;
      const Field sg = sobel_penalty_gradient(map);
      for (size_t k = 0; k < grad.size(); ++k) grad[k] += lambda * sg[k];
    };
    add_reg(cfg.loss.lambda_sos, props.sos, g.d_sos);
    add_reg(cfg.loss.lambda_density, props.density, g.d_density);
    add_reg(cfg.loss.lambda_attenuation, props.attenuation, g.d_attenuation);

    losses.push_back(loss);
    ActiveSet active;
    active.sos = active.density = active.attenuation = true;
    const double grad_inf = std::max(
        {g.d_sos.max_abs(), g.d_density.max_abs(), g.d_attenuation.max_abs()});
    if (log) {
      log->iterations.push_back({0, 0, it, loss});
      accumulate(log->clamps, opt.step(props, g, active, nullptr, cfg.bounds));
    } else {
      opt.step(props, g, active, nullptr, cfg.bounds);
    }

    try {
      check_cfl(props, ctx.grid);
    } catch (const CflViolation& e) {
      throw CflViolation(e.cr, std::string(e.what()) + " (after update at iteration " +
                                   std::to_string(it) + ")");
    }

    if (init_grad_inf < 0.0) init_grad_inf = grad_inf;
    if (grad_inf < cfg.stop.grad_tol_rel * init_grad_inf) {
      stop_reason = "gradient_norm";
      break;
    }
    const int p = cfg.stop.patience;
    if (p > 0 && static_cast<int>(losses.size()) > p) {
      const double before = losses[losses.size() - 1 - p];
      const double decrease = (before - losses.back()) / std::max(std::fabs(before), 1e-300);
      if (decrease < cfg.stop.plateau_tol) {
        stop_reason = "loss_plateau";
        break;
      }
    }
  }
  if (log) log->stop_reason = stop_reason;
  return props;
}

}  // namespace nwi
