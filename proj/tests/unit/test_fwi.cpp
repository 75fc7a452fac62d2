// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "nwi/fwi.hpp"

using namespace nwi;
using namespace nwi::testfix;

namespace {

struct TinyProblem {
  SimulationGrid grid{8, 8, 20, 5e-4, 1.25e-7};
  PropertySet props;
  PulseField pulse;
  ProbeGeometry geom = ProbeGeometry::linear(1, 2, 4, 1);

  explicit TinyProblem(std::uint64_t seed, bool heterogeneous = true)
      : props(heterogeneous
                  ? PropertySet(smooth_random(8, 8, 1430, 1540, seed),
                                smooth_random(8, 8, 950, 1060, seed + 1),
                                smooth_random(8, 8, 100, 1500, seed + 2), Field(8, 8, 0.0))
                  : PropertySet::uniform(8, 8, 1480, 1000, 0, 0)),
        pulse(8, 8, 20) {
    Waveform w;
    w.f0 = 3e5;
    w.cycles = 2.0;
    w.amplitude = 1e18;
    std::vector<double> tr(20);
    for (int n = 0; n < 20; ++n) tr[n] = w.eval(n * grid.dt);
    pulse.add_source(1, 4, std::move(tr));
  }

  Field d_eff() const { return props.attenuation; }  // no PML in these fixtures

  std::vector<double> stepped_as_vector() const {
    const Wavefield wf = simulate_full(props, pulse, grid, PmlConfig{0, 0.0});
    return wf.raw();
  }
};

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::fabs(v));
  double worst = 0.0;
  for (size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::fabs(a[k] - b[k]));
  return scale == 0.0 ? worst : worst / scale;
}

}  // namespace

TEST_CASE("homogeneous operator structure") {
  SimulationGrid g(6, 6, 10, 5e-4, 1.25e-7);
  const Field c0(6, 6, 1480.0);
  const LinearWaveOperator A = assemble_homogeneous(c0, g);

  SUBCASE("zero in, zero out") {
    std::vector<double> zero(A.unknowns(), 0.0);
    for (double v : A.apply(zero)) CHECK(v == 0.0);
  }

  SUBCASE("interior row has 3 temporal + 5 spatial entries on 7 columns") {
    const int cell = 3 * 6 + 3;
    const auto row = A.row(5, cell);
    std::set<int> cols;
    for (const auto& e : row)
      if (e.val != 0.0) cols.insert(e.col);
    CHECK(cols.size() == 7);  // centre column shared between blocks
  }

  SUBCASE("size cap raises ProblemTooLarge") {
    CHECK_THROWS_AS(assemble_homogeneous(c0, g, 10), ProblemTooLarge);
  }
}

TEST_CASE("homogeneous operator applied to the stepped field recovers f") {
  TinyProblem t(5, false);
  const LinearWaveOperator A = assemble_homogeneous(t.props.sos, t.grid);
  const std::vector<double> u = t.stepped_as_vector();
  const std::vector<double> got = A.apply(u);
  const std::vector<double> want = pulse_to_vector(t.pulse, t.grid);
  CHECK(max_rel_diff(want, got) < 1e-8);
}

TEST_CASE("linear operator") {
  SUBCASE("reduces to the homogeneous operator for d = 0, constant density") {
    SimulationGrid g(6, 6, 10, 5e-4, 1.25e-7);
    const Field c0 = smooth_random(6, 6, 1400, 1550, 3);
    const LinearWaveOperator Ah = assemble_homogeneous(c0, g);
    const LinearWaveOperator Al =
        assemble_linear(c0, Field(6, 6, 777.0), Field(6, 6, 0.0), g);
    for (size_t r = 0; r < g.cells(); ++r) {
      REQUIRE(Ah.b1_rows()[r].size() == Al.b1_rows()[r].size());
      for (size_t e = 0; e < Ah.b1_rows()[r].size(); ++e) {
        CHECK(Ah.b1_rows()[r][e].col == Al.b1_rows()[r][e].col);
        CHECK(Ah.b1_rows()[r][e].val ==
              doctest::Approx(Al.b1_rows()[r][e].val).epsilon(1e-14));
      }
      CHECK(Ah.b2_diag()[r] == Al.b2_diag()[r]);
    }
  }

  SUBCASE("matrix application equals the stencil-built operator rows") {
    TinyProblem t(7);
    const LinearWaveOperator A =
        assemble_linear(t.props.sos, t.props.density, t.d_eff(), t.grid);
    const std::vector<double> u = t.stepped_as_vector();
    const std::vector<double> via_sparse = A.apply(u);

    // Matrix-free oracle: apply the PDE rows with the stencil functions.
    const SimulationGrid& g = t.grid;
    Field invq(8, 8);
    for (size_t k = 0; k < invq.size(); ++k) invq[k] = 1.0 / t.props.density[k];
    const auto [px, pz] = grad(invq, g.dx);
    std::vector<double> oracle(u.size());
    const size_t cells = g.cells();
    for (size_t k = 0; k < 2 * cells; ++k) oracle[k] = u[k];
    Field u1(8, 8), gx(8, 8), gzf(8, 8), lap(8, 8);
    for (int n = 2; n < g.nt; ++n) {
      std::copy(u.begin() + (n - 1) * cells, u.begin() + n * cells, u1.data());
      grad_into(u1, g.dx, gx, gzf);
      laplacian_into(u1, g.dx, lap);
      for (size_t r = 0; r < cells; ++r) {
        const double u2 = u[(n - 2) * cells + r];
        const double un = u[n * cells + r];
        const double d = t.d_eff()[r];
        const double cq = t.props.sos[r] * t.props.sos[r] * t.props.density[r];
        const double c2 = t.props.sos[r] * t.props.sos[r];
        oracle[n * cells + r] = (un - 2.0 * u1[r] + u2) / (g.dt * g.dt) +
                                2.0 * d * (u1[r] - u2) / g.dt + d * d * u1[r] -
                                cq * (px[r] * gx[r] + pz[r] * gzf[r]) - c2 * lap[r];
      }
    }
    CHECK(max_rel_diff(oracle, via_sparse) < 1e-12);
  }
}

TEST_CASE("solver round trips") {
  TinyProblem t(11);
  const LinearWaveOperator A =
      assemble_linear(t.props.sos, t.props.density, t.d_eff(), t.grid);

  SUBCASE("f = 0 gives u = 0") {
    std::vector<double> zero(A.unknowns(), 0.0);
    for (double v : solve_wavefield(A, zero)) CHECK(v == 0.0);
  }

  SUBCASE("A solve(A, f) = f") {
    const std::vector<double> f = pulse_to_vector(t.pulse, t.grid);
    const std::vector<double> u = solve_wavefield(A, f);
    CHECK(max_rel_diff(f, A.apply(u)) < 1e-10);
  }

  SUBCASE("A^T solve^T(A, y) = y") {
    std::mt19937_64 eng(3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> y(A.unknowns());
    for (auto& v : y) v = dist(eng);
    const std::vector<double> r = solve_wavefield_transpose(A, y);
    // <A x, r> == <x, A^T r> = <x, y> for random x as a transpose check.
    std::vector<double> x(A.unknowns());
    for (auto& v : x) v = dist(eng);
    const std::vector<double> ax = A.apply(x);
    double lhs = 0.0, rhs = 0.0;
    for (size_t k = 0; k < x.size(); ++k) {
      lhs += ax[k] * r[k];
      rhs += x[k] * y[k];
    }
    CHECK(rel_err(lhs, rhs) < 1e-12);
  }

  SUBCASE("matrix solve equals the time stepper with B = 0") {
    const std::vector<double> f = pulse_to_vector(t.pulse, t.grid);
    const std::vector<double> u = solve_wavefield(A, f);
    CHECK(max_rel_diff(t.stepped_as_vector(), u) < 1e-9);
  }
}

TEST_CASE("fwi gradient") {
  TinyProblem t(21);
  const LinearWaveOperator A =
      assemble_linear(t.props.sos, t.props.density, t.d_eff(), t.grid);
  const std::vector<double> f = pulse_to_vector(t.pulse, t.grid);
  const std::vector<double> u = solve_wavefield(A, f);

  // Residual against data from a perturbed medium.
  TinyProblem truth(22);
  ChannelData res(t.geom.nc(), t.grid.nt, t.grid.dt);
  {
    const ChannelData m =
        simulate_channels(truth.props, t.pulse, t.grid, PmlConfig{0, 0.0}, t.geom);
    const size_t cells = t.grid.cells();
    for (int j = 0; j < t.geom.nc(); ++j) {
      const auto [ri, cj] = t.geom.element_cells[j];
      for (int n = 0; n < t.grid.nt; ++n)
        res.at(j, n) = u[n * cells + ri * t.grid.nz + cj] - m.at(j, n);
    }
  }

  SUBCASE("zero residual gives zero gradients") {
    const ChannelData zero(t.geom.nc(), t.grid.nt, t.grid.dt);
    const FwiGradients g = fwi_gradient(A, u, zero, t.geom, t.props.sos, t.props.density,
                                        t.d_eff());
    for (size_t k = 0; k < g.d_sos.size(); ++k) {
      CHECK(g.d_sos[k] == 0.0);
      CHECK(g.d_density[k] == 0.0);
      CHECK(g.d_attenuation[k] == 0.0);
    }
  }

  SUBCASE("matches finite differences of the square loss") {
    const FwiGradients g =
        fwi_gradient(A, u, res, t.geom, t.props.sos, t.props.density, t.d_eff());

    // Independent loss oracle: assemble, solve, restrict, half square sum.
    const ChannelData m = [&]() {
      ChannelData out(t.geom.nc(), t.grid.nt, t.grid.dt);
      const size_t cells = t.grid.cells();
      for (int j = 0; j < t.geom.nc(); ++j) {
        const auto [ri, cj] = t.geom.element_cells[j];
        for (int n = 0; n < t.grid.nt; ++n)
          out.at(j, n) = u[n * cells + ri * t.grid.nz + cj] - res.at(j, n);
      }
      return out;
    }();
    auto loss_at = [&](const PropertySet& p) {
      const LinearWaveOperator Ap = assemble_linear(p.sos, p.density, p.attenuation, t.grid);
      const std::vector<double> up = solve_wavefield(Ap, f);
      const size_t cells = t.grid.cells();
      double s = 0.0;
      for (int j = 0; j < t.geom.nc(); ++j) {
        const auto [ri, cj] = t.geom.element_cells[j];
        for (int n = 0; n < t.grid.nt; ++n) {
          const double r = up[n * cells + ri * t.grid.nz + cj] - m.at(j, n);
          s += 0.5 * r * r;
        }
      }
      return s;
    };

    std::mt19937_64 eng(5);
    std::uniform_int_distribution<int> pick(0, 63);
    struct {
      const Field* grad;
      int which;
      double h;
    } plans[] = {{&g.d_sos, 0, 0.3}, {&g.d_density, 1, 0.2}, {&g.d_attenuation, 2, 40.0}};
    for (const auto& plan : plans) {
      const double gmax = plan.grad->max_abs();
      int tested = 0, guard = 0;
      double worst = 0.0;
      while (tested < 10 && guard++ < 1000) {
        const int cell = pick(eng);
        if (std::fabs((*plan.grad)[cell]) < 1e-3 * gmax) continue;
        auto perturbed = [&](double off) {
          PropertySet p = t.props;
          Field& mref = plan.which == 0 ? p.sos : (plan.which == 1 ? p.density : p.attenuation);
          mref[cell] += off;
          return loss_at(p);
        };
        const double h = plan.h;
        const double fd =
            (-perturbed(2 * h) + 8.0 * perturbed(h) - 8.0 * perturbed(-h) + perturbed(-2 * h)) /
            (12.0 * h);
        worst = std::max(worst, rel_err(fd, (*plan.grad)[cell]));
        ++tested;
      }
      INFO("fwi property ", plan.which, " worst ", worst);
      CHECK(tested == 10);
      CHECK(worst < 1e-5);
    }
  }

  SUBCASE("matches the adjoint engine at B = 0 to 1e-8") {
    auto [pred, tape] =
        forward_with_tape(t.props, t.pulse, t.grid, PmlConfig{0, 0.0}, t.geom);
    const PropertyGradients ag = backprop(tape, res);
    const FwiGradients fg =
        fwi_gradient(A, u, res, t.geom, t.props.sos, t.props.density, t.d_eff());

    auto compare = [&](const Field& a, const Field& b) {
      const double scale = std::max(a.max_abs(), b.max_abs());
      for (size_t k = 0; k < a.size(); ++k)
        CHECK(std::fabs(a[k] - b[k]) <= 1e-8 * scale);
    };
    compare(ag.d_sos, fg.d_sos);
    compare(ag.d_density, fg.d_density);
    compare(ag.d_attenuation, fg.d_attenuation);
  }
}

TEST_CASE("fwi_invert") {
  TinyProblem t(31, false);
  PhysicsContext ctx;
  ctx.grid = t.grid;
  ctx.pml = PmlConfig{0, 0.0};
  ctx.geom = t.geom;

  InversionConfig cfg;
  cfg.optimizer = OptimizerKind::adam;
  cfg.rates = {1.0, 1.0, 1.0, 1e-3};
  cfg.stop.max_iterations = 10;
  cfg.stop.patience = 1000;

  SUBCASE("nonlinearity map passes through untouched") {
    Field b(8, 8, 0.0);
    b(3, 3) = 1.25;
    PropertySet init(t.props.sos, t.props.density, t.props.attenuation, b);
    const ChannelData measured =
        simulate_channels(init, t.pulse, t.grid, ctx.pml, t.geom);
    const PropertySet out = fwi_invert(measured, t.pulse, init, cfg, ctx);
    for (size_t k = 0; k < b.size(); ++k) CHECK(out.nonlinearity[k] == b[k]);
  }

  SUBCASE("starting at the optimum, drift stays bounded by the step size") {
    const ChannelData measured =
        simulate_channels(t.props, t.pulse, t.grid, ctx.pml, t.geom);
    RunLog log;
    const PropertySet out = fwi_invert(measured, t.pulse, t.props, cfg, ctx, 200000, &log);
    CHECK(log.iterations.front().loss == doctest::Approx(0.0));
    // Adam moves at most rate per step from a zero-gradient start.
    for (size_t k = 0; k < out.sos.size(); ++k) {
      CHECK(std::fabs(out.sos[k] - t.props.sos[k]) <=
            cfg.rates.sos * cfg.stop.max_iterations + 1e-12);
      CHECK(std::fabs(out.density[k] - t.props.density[k]) <=
            cfg.rates.density * cfg.stop.max_iterations + 1e-12);
    }
  }

  SUBCASE("grid above the cap is refused") {
    CHECK_THROWS_AS(
        fwi_invert(ChannelData(4, 20, t.grid.dt), t.pulse, t.props, cfg, ctx, 100),
        ProblemTooLarge);
  }
}

TEST_CASE("fwi_invert closes most of the data misfit on a single inclusion") {
  // Linear phantom: one sos bump in water, observed through the array.
  SimulationGrid grid(12, 12, 60, 5e-4, 1.25e-7);
  auto geom = ProbeGeometry::linear(1, 1, 10, 1);
  PhysicsContext ctx;
  ctx.grid = grid;
  ctx.pml = PmlConfig{0, 0.0};
  ctx.geom = geom;

  Field c_true(12, 12, 1480.0);
  for (int i = 5; i <= 7; ++i)
    for (int j = 5; j <= 7; ++j) c_true(i, j) = 1510.0;
  const PropertySet truth(c_true, Field(12, 12, 1000.0), Field(12, 12, 0.0), Field(12, 12, 0.0));
  const PropertySet init = PropertySet::uniform(12, 12, 1480, 1000, 0, 0);

  Waveform w;
  w.f0 = 3e5;
  w.cycles = 2.0;
  w.amplitude = 1e18;
  PulseField pulse(12, 12, 60);
  for (int e : {2, 5, 8}) {
    std::vector<double> tr(60);
    for (int n = 0; n < 60; ++n) tr[n] = w.eval(n * grid.dt);
    const auto [r, c] = geom.element_cells[e];
    pulse.add_source(r, c, std::move(tr));
  }

  const ChannelData measured = simulate_channels(truth, pulse, grid, ctx.pml, geom);

  InversionConfig cfg;
  cfg.optimizer = OptimizerKind::adam;
  cfg.rates = {1.0, 1.0, 1.0, 1e-3};
  cfg.stop.max_iterations = 200;
  cfg.stop.patience = 10000;
  cfg.stop.grad_tol_rel = 0.0;

  RunLog log;
  fwi_invert(measured, pulse, init, cfg, ctx, 200000, &log);
  REQUIRE(!log.iterations.empty());
  const double first = log.iterations.front().loss;
  const double last = log.iterations.back().loss;
  INFO("fwi loss ", first, " -> ", last);
  CHECK(last < 0.10 * first);
}
