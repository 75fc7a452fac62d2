// SPDX-License-Identifier: Apache-2.0
#include "nwi/adjoint.hpp"

#include <cmath>
#include <string>

#include "nwi/regularizer.hpp"

namespace nwi {

std::pair<ChannelData, Tape> forward_with_tape(const PropertySet& props, const PulseField& pulse,
                                               const SimulationGrid& grid, const PmlConfig& pml,
                                               const ProbeGeometry& geom,
                                               const SolverLimits& limits,
                                               size_t tape_budget_bytes) {
  geom.validate_inside(grid.nx, grid.nz);
  const size_t need = Tape::bytes_needed(grid);
  if (need > tape_budget_bytes)
    throw TapeMemoryExceeded("tape: needs " + std::to_string(need >> 20) + " MiB, budget " +
                             std::to_string(tape_budget_bytes >> 20) + " MiB");

  Tape tape;
  tape.grid_ = grid;
  tape.props_ = props;
  tape.d_eff_ = effective_attenuation(props.attenuation, pml_profile(grid, pml));
  tape.geom_ = geom;
  tape.limits_ = limits;
  tape.u_.resize(grid.nt);
  tape.g1_.resize(grid.nt);

  ChannelData ch(geom.nc(), grid.nt, grid.dt);

  // Same code path as simulate_channels so outputs match bit for bit.
  check_cfl(props, grid);
  pulse.check_grid(grid);
  const StepCoefficients co(props, tape.d_eff_, grid, limits);

  Field u_prev2(grid.nx, grid.nz), u_prev(grid.nx, grid.nz), u_next(grid.nx, grid.nz);
  Field gx(grid.nx, grid.nz), gz(grid.nx, grid.nz), lap(grid.nx, grid.nz);
  Field fbuf(grid.nx, grid.nz, 0.0);
  Field g1buf(grid.nx, grid.nz);

  auto record = [&](int n, const Field& s, const Field* g1) {
    tape.u_[n] = s;
    if (g1) tape.g1_[n] = *g1;
    for (int j = 0; j < geom.nc(); ++j) {
      const auto [r, c] = geom.element_cells[j];
      ch.at(j, n) = s(r, c);
    }
  };

  record(0, u_prev2, nullptr);
  record(1, u_prev, nullptr);
  for (int n = 2; n < grid.nt; ++n) {
    for (const auto& s : pulse.sources()) fbuf(s.i, s.j) = s.trace[n];
    westervelt_step_into(co, u_prev, u_prev2, fbuf, n, u_next, &g1buf, gx, gz, lap);
    record(n, u_next, &g1buf);
    std::swap(u_prev2, u_prev);
    std::swap(u_prev, u_next);
  }
  return {std::move(ch), std::move(tape)};
}

PropertyGradients backprop(const Tape& tape, const ChannelData& residual) {
  const SimulationGrid& grid = tape.grid();
  const ProbeGeometry& geom = tape.geom();
  if (residual.nc != geom.nc() || residual.nt != grid.nt)
    throw ShapeMismatch("backprop: residual must be [nc x nt]");

  const StepCoefficients co(tape.props(), tape.d_eff(), grid);
  const int nx = grid.nx, nz = grid.nz;
  const double inv_dt2 = co.inv_dt2;
  const double two_over_dt = 2.0 / grid.dt;

  PropertyGradients g(nx, nz);
  Field abar(nx, nz), c2bar(nx, nz);     // adjoints of C^2 Q and C^2
  Field pbx(nx, nz), pbz(nx, nz);        // adjoints of px, pz = grad(1/Q)
  Field carry1(nx, nz), carry2(nx, nz);  // adjoints flowing to U[n], U[n-1]
  Field lam(nx, nz), a1(nx, nz), a2(nx, nz);
  Field gx(nx, nz), gzf(nx, nz), lap(nx, nz);
  Field buf_x(nx, nz), buf_z(nx, nz), buf_l(nx, nz), tmp(nx, nz);

  for (int n = grid.nt - 1; n >= 2; --n) {
    // lambda[n] = R^T residual[:, n] + contributions from later steps
    lam = carry1;
    for (int j = 0; j < geom.nc(); ++j) {
      const auto [r, c] = geom.element_cells[j];
      lam(r, c) += residual.at(j, n);
    }

    const Field& u1 = tape.u(n - 1);
    const Field& u2 = tape.u(n - 2);
    const Field& un = tape.u(n);
    const Field& g1m = tape.g1(n);
    grad_into(u1, grid.dx, gx, gzf);
    laplacian_into(u1, grid.dx, lap);

    for (size_t k = 0; k < lam.size(); ++k) {
      const double g1 = g1m[k];
      if (!(g1 > co.g1_floor))
        throw NonlinearityBlowup(n, "backprop: cached G1 at or below floor at step " +
                                        std::to_string(n));
      const double mu = lam[k] / g1;
      const double w = u1[k] - u2[k];
      const double t = 2.0 * u1[k] - u2[k] - un[k];
      const double d = tape.d_eff()[k];

      // Property pieces of the step adjoint.
      g.d_attenuation[k] += mu * (-(2.0 * d + two_over_dt) * u1[k] + two_over_dt * u2[k]);
      const double bracket = u1[k] * t - w * w;
      g.d_nonlinearity[k] += 2.0 * inv_dt2 / co.cq[k] * mu * bracket;
      const double coupling = co.px[k] * gx[k] + co.pz[k] * gzf[k];
      abar[k] += mu * coupling - inv_dt2 * co.two_k[k] / co.cq[k] * mu * bracket;
      c2bar[k] += mu * lap[k];
      pbx[k] += co.cq[k] * mu * gx[k];
      pbz[k] += co.cq[k] * mu * gzf[k];

      // State adjoints, per-cell parts.
      const double g2 = 2.0 * g1 - co.g2c[k];
      const double g3 = -g1 + co.g3c[k];
      const double g4 = -inv_dt2 * co.two_k[k];
      a1[k] = g2 * mu + 2.0 * g4 * w * mu + inv_dt2 * co.two_k[k] * t * mu;
      a2[k] = g3 * mu - 2.0 * g4 * w * mu;

      buf_x[k] = co.px[k] * co.cq[k] * mu;
      buf_z[k] = co.pz[k] * co.cq[k] * mu;
      buf_l[k] = co.c2[k] * mu;
    }

    // Spatial transposes: adjoint of the coupling and Laplacian terms.
    grad_x_transpose_into(buf_x, grid.dx, tmp);
    for (size_t k = 0; k < a1.size(); ++k) a1[k] += tmp[k];
    grad_z_transpose_into(buf_z, grid.dx, tmp);
    for (size_t k = 0; k < a1.size(); ++k) a1[k] += tmp[k];
    laplacian_transpose_into(buf_l, grid.dx, tmp);
    for (size_t k = 0; k < a1.size(); ++k) a1[k] += tmp[k];

    // Roll: U[n-1] collects its U2-slot contribution from step n+1 (carry2)
    // plus this step's U1-slot contribution.
    for (size_t k = 0; k < a1.size(); ++k) {
      carry1[k] = carry2[k] + a1[k];
      carry2[k] = a2[k];
    }
  }

  // Chain to the physical maps: a = C^2 Q, c2 = C^2, px/pz = grad(1/Q).
  grad_x_transpose_into(pbx, grid.dx, tmp);
  Field invq_bar = tmp;
  grad_z_transpose_into(pbz, grid.dx, tmp);
  for (size_t k = 0; k < invq_bar.size(); ++k) invq_bar[k] += tmp[k];

  const PropertySet& p = tape.props();
  for (size_t k = 0; k < abar.size(); ++k) {
    const double c = p.sos[k], q = p.density[k];
    g.d_sos[k] = abar[k] * 2.0 * c * q + c2bar[k] * 2.0 * c;
    g.d_density[k] = abar[k] * c * c - invq_bar[k] / (q * q);
  }
  return g;
}

std::pair<double, PropertyGradients> loss_and_gradient(
    const PropertySet& props, const PulseField& pulse, const ChannelData& measured,
    const LossConfig& loss_cfg, const SimulationGrid& grid, const PmlConfig& pml,
    const ProbeGeometry& geom, const SolverLimits& limits, size_t tape_budget_bytes) {
  if (measured.nc != geom.nc() || measured.nt != grid.nt)
    throw ShapeMismatch("loss_and_gradient: measured data must be [nc x nt]");

  auto [pred, tape] = forward_with_tape(props, pulse, grid, pml, geom, limits, tape_budget_bytes);

  ChannelData res = pred;
  double sq = 0.0;
  for (size_t k = 0; k < res.samples.size(); ++k) {
    res.samples[k] -= measured.samples[k];
    sq += res.samples[k] * res.samples[k];
  }
  const double dnorm = std::sqrt(sq);

  double loss = dnorm;
  PropertyGradients g(grid.nx, grid.nz);
  if (dnorm > 0.0) {
    for (double& r : res.samples) r /= dnorm;  // d||P-M||_F / dP
    g = backprop(tape, res);
  }

  auto add_reg = [&](double lambda, const Field& map, Field& grad) {
    if (lambda == 0.0) return;
    loss += lambda * sobel_penalty(map);
    const Field sg = sobel_penalty_gradient(map);
    for (size_t k = 0; k < grad.size(); ++k) grad[k] += lambda * sg[k];
  };
  add_reg(loss_cfg.lambda_sos, props.sos, g.d_sos);
  add_reg(loss_cfg.lambda_density, props.density, g.d_density);
  add_reg(loss_cfg.lambda_attenuation, props.attenuation, g.d_attenuation);
  add_reg(loss_cfg.lambda_nonlinearity, props.nonlinearity, g.d_nonlinearity);

  return {loss, std::move(g)};
}

}  // namespace nwi
