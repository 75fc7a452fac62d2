// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "nwi/acquisition.hpp"
#include "nwi/inversion.hpp"

using namespace nwi;
using namespace nwi::testfix;

TEST_CASE("sobel penalty") {
  SUBCASE("constant map has zero penalty and gradient") {
    CHECK(sobel_penalty(Field(6, 6, 3.0)) == 0.0);
    const Field g = sobel_penalty_gradient(Field(6, 6, 3.0));
    for (size_t k = 0; k < g.size(); ++k) CHECK(g[k] == 0.0);
  }

  SUBCASE("interior delta gives sqrt(24)") {
    Field f(7, 7, 0.0);
    f(3, 3) = 1.0;
    CHECK(sobel_penalty(f) == doctest::Approx(std::sqrt(24.0)).epsilon(1e-12));
    // response entries are the kernel values around the delta
    const Field rz = sobel_response_z(f);
    CHECK(rz(3, 2) == doctest::Approx(-2.0));
    CHECK(rz(3, 4) == doctest::Approx(2.0));
    CHECK(rz(2, 2) == doctest::Approx(-1.0));
    CHECK(rz(4, 4) == doctest::Approx(1.0));
  }

  SUBCASE("x-ramp produces no z response in the interior") {
    Field f(7, 7);
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 7; ++j) f(i, j) = 2.0 * i;
    const Field rz = sobel_response_z(f);
    for (int i = 1; i < 6; ++i)
      for (int j = 1; j < 6; ++j) CHECK(rz(i, j) == doctest::Approx(0.0));
    const Field rx = sobel_response_x(f);
    for (int i = 1; i < 6; ++i)
      for (int j = 1; j < 6; ++j) CHECK(rx(i, j) != 0.0);
  }

  SUBCASE("gradient matches finite differences") {
    const Field f = smooth_random(6, 6, -1.0, 2.0, 9);
    const Field g = sobel_penalty_gradient(f);
    std::mt19937_64 eng(3);
    std::uniform_int_distribution<int> pick(0, 5);
    for (int trial = 0; trial < 10; ++trial) {
      const int i = pick(eng), j = pick(eng);
      Field fp = f, fm = f;
      const double h = 1e-6;
      fp(i, j) += h;
      fm(i, j) -= h;
      const double fd = (sobel_penalty(fp) - sobel_penalty(fm)) / (2.0 * h);
      CHECK(fd == doctest::Approx(g(i, j)).epsilon(1e-6));
    }
  }

  SUBCASE("tiny grids are rejected") {
    CHECK_THROWS_AS(sobel_penalty(Field(2, 6, 1.0)), GridTooSmall);
  }
}

TEST_CASE("total loss composition") {
  auto d = make_desk_problem(60);
  PhysicsContext ctx;
  ctx.grid = d.grid;
  ctx.pml = d.pml;
  ctx.geom = d.geom;
  ctx.limits = d.limits;

  SUBCASE("lambda = 0 reduces to the Frobenius data term") {
    const ChannelData pred =
        simulate_channels(d.props, d.pulse, d.grid, d.pml, d.geom, d.limits);
    double sq = 0.0;
    for (size_t k = 0; k < pred.samples.size(); ++k) {
      const double r = pred.samples[k] - d.measured.samples[k];
      sq += r * r;
    }
    CHECK(total_loss(d.props, d.measured, d.pulse, LossConfig{}, ctx) ==
          doctest::Approx(std::sqrt(sq)).epsilon(1e-14));
  }

  SUBCASE("regularization part is linear in lambda") {
    const double l0 = total_loss(d.props, d.measured, d.pulse, LossConfig{}, ctx);
    const double l1 = total_loss(d.props, d.measured, d.pulse, d.loss, ctx);
    LossConfig twice = d.loss;
    twice.lambda_sos *= 2.0;
    twice.lambda_density *= 2.0;
    twice.lambda_attenuation *= 2.0;
    twice.lambda_nonlinearity *= 2.0;
    const double l2 = total_loss(d.props, d.measured, d.pulse, twice, ctx);
    CHECK(l2 - l0 == doctest::Approx(2.0 * (l1 - l0)).epsilon(1e-9));
  }
}

TEST_CASE("optimizer step") {
  const int nx = 5, nz = 5;
  auto props = PropertySet::uniform(nx, nz, 1480.0, 1000.0, 10.0, 2.0);
  PropertyGradients zero(nx, nz);
  PhysicalBounds bounds;
  ActiveSet all{true, true, true, true};

  SUBCASE("zero gradient leaves properties unchanged for gd and adam") {
    for (auto kind : {OptimizerKind::gd, OptimizerKind::adam}) {
      OptimizerState opt(kind, LearningRates{}, AdamParams{}, nx, nz);
      PropertySet p = props;
      opt.step(p, zero, all, nullptr, bounds);
      for (size_t k = 0; k < p.sos.size(); ++k) {
        CHECK(p.sos[k] == props.sos[k]);
        CHECK(p.density[k] == props.density[k]);
        CHECK(p.attenuation[k] == props.attenuation[k]);
        CHECK(p.nonlinearity[k] == props.nonlinearity[k]);
      }
    }
  }

  SUBCASE("gd applies the literal update") {
    OptimizerState opt(OptimizerKind::gd, LearningRates{0.1, 1.0, 1e-2, 1e-3}, AdamParams{}, nx,
                       nz);
    PropertyGradients g(nx, nz);
    g.d_sos.fill(1.0);
    PropertySet p = props;
    ActiveSet only_c;
    only_c.sos = true;
    opt.step(p, g, only_c, nullptr, bounds);
    for (size_t k = 0; k < p.sos.size(); ++k)
      CHECK(p.sos[k] == doctest::Approx(1480.0 - 0.1).epsilon(1e-14));
  }

  SUBCASE("masked cells stay bit-identical") {
    OptimizerState opt(OptimizerKind::adam, LearningRates{}, AdamParams{}, nx, nz);
    PropertyGradients g(nx, nz);
    for (auto& v : g.d_attenuation) v = 2.5;
    for (auto& v : g.d_nonlinearity) v = -1.0;
    Mask mask(nx, nz, false);
    mask.set(2, 2, true);
    mask.set(2, 3, true);
    PropertySet p = props;
    ActiveSet db;
    db.attenuation = db.nonlinearity = true;
    opt.step(p, g, db, &mask, bounds);
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nz; ++j) {
        if (mask(i, j)) {
          CHECK(p.attenuation(i, j) != props.attenuation(i, j));
        } else {
          CHECK(p.attenuation(i, j) == props.attenuation(i, j));
          CHECK(p.nonlinearity(i, j) == props.nonlinearity(i, j));
        }
      }
  }

  SUBCASE("clamping counts and floors") {
    OptimizerState opt(OptimizerKind::gd, LearningRates{1.0, 1.0, 1.0, 1.0}, AdamParams{}, nx,
                       nz);
    PropertyGradients g(nx, nz);
    g.d_attenuation.fill(100.0);  // drives attenuation of 10 to -90 -> clamp to 0
    PropertySet p = props;
    ActiveSet only_d;
    only_d.attenuation = true;
    const ClampCounts c = opt.step(p, g, only_d, nullptr, bounds);
    CHECK(c.attenuation == nx * nz);
    for (size_t k = 0; k < p.attenuation.size(); ++k) CHECK(p.attenuation[k] == 0.0);
  }

  SUBCASE("non-finite gradients are rejected") {
    OptimizerState opt(OptimizerKind::gd, LearningRates{}, AdamParams{}, nx, nz);
    PropertyGradients g(nx, nz);
    g.d_sos(1, 1) = std::numeric_limits<double>::quiet_NaN();
    PropertySet p = props;
    ActiveSet only_c;
    only_c.sos = true;
    CHECK_THROWS_AS(opt.step(p, g, only_c, nullptr, bounds), NonFiniteGradient);
  }
}

TEST_CASE("tissue mask") {
  SUBCASE("uniform water density gives an empty mask") {
    const Mask m = tissue_mask(Field(6, 6, 1000.0), 1000.0, 0.02);
    CHECK(m.count() == 0);
  }

  SUBCASE("one deviating cell dilates to a 4-neighbour cross") {
    Field rho(7, 7, 1000.0);
    rho(3, 3) = 1060.0;  // |1060-1000|/1000 = 0.06 > 0.03
    const Mask m = tissue_mask(rho, 1000.0, 0.03);
    CHECK(m.count() == 5);
    CHECK(m(3, 3));
    CHECK(m(2, 3));
    CHECK(m(4, 3));
    CHECK(m(3, 2));
    CHECK(m(3, 4));
    CHECK(!m(2, 2));
  }

  SUBCASE("zero threshold marks any exact deviation") {
    Field rho(5, 5, 1000.0);
    rho(1, 1) = 1000.0000001;
    const Mask m = tissue_mask(rho, 1000.0, 0.0);
    CHECK(m(1, 1));
    CHECK(m.count() == 5);
  }
}

namespace {

struct InvertFixture {
  SimulationGrid grid{14, 14, 40, 5e-4, 1.25e-7};
  PmlConfig pml{2, suggested_pml_dmax(1480.0, 2, 5e-4, 1.25e-7)};
  ProbeGeometry geom = ProbeGeometry::linear(2, 2, 10, 1);
  PhysicsContext ctx;
  PropertySet truth;
  PropertySet init = PropertySet::uniform(14, 14, 1480, 1000, 0, 0);
  std::vector<Emission> dataset;

  explicit InvertFixture(int n_emissions) : truth(make_truth()) {
    ctx.grid = grid;
    ctx.pml = pml;
    ctx.geom = geom;

    EmissionPlan plan;
    plan.n_emissions = n_emissions;
    plan.aperture_elements = 6;
    plan.stride_elements = n_emissions > 1 ? 4 / (n_emissions - 1) : 0;
    if (n_emissions == 2) plan.stride_elements = 4;
    plan.waveform.f0 = 3e5;
    plan.waveform.cycles = 2.0;
    plan.waveform.amplitude = 5e18;
    plan.focus_depth = 3e-3;
    const double inf = std::numeric_limits<double>::infinity();
    dataset = acquire_sequence(truth, plan, geom, grid, pml, inf, 11);
  }

  static PropertySet make_truth() {
    Field c(14, 14, 1480.0);
    for (int i = 6; i <= 9; ++i)
      for (int j = 5; j <= 8; ++j) c(i, j) = 1500.0;
    return PropertySet(c, Field(14, 14, 1000.0), Field(14, 14, 0.0), Field(14, 14, 0.0));
  }

  InversionConfig config(int iters) const {
    InversionConfig cfg;
    cfg.optimizer = OptimizerKind::adam;
    cfg.rates = {0.5, 0.5, 1e-2, 1e-3};
    cfg.schedule.k1_iters = iters;  // keep both phases out of the way unless staged
    cfg.stop.max_iterations = iters;
    cfg.stop.patience = 1 << 20;
    cfg.stop.grad_tol_rel = 0.0;
    return cfg;
  }
};

}  // namespace

TEST_CASE("nwi_invert basics") {
  InvertFixture f(1);

  SUBCASE("zero iterations returns the initialization") {
    const PropertySet out = nwi_invert(f.dataset[0].measured, f.dataset[0].pulse, f.init,
                                       f.config(0), f.ctx);
    for (size_t k = 0; k < out.sos.size(); ++k) {
      CHECK(out.sos[k] == f.init.sos[k]);
      CHECK(out.density[k] == f.init.density[k]);
    }
  }

  SUBCASE("starting at the truth, noiseless: loss stays near zero") {
    RunLog log;
    const PropertySet out = nwi_invert(f.dataset[0].measured, f.dataset[0].pulse, f.truth,
                                       f.config(10), f.ctx, &log);
    CHECK(log.iterations.front().loss == doctest::Approx(0.0).epsilon(1e-12));
    for (const auto& rec : log.iterations) CHECK(rec.loss <= 1e-9);
    for (size_t k = 0; k < out.sos.size(); ++k)
      CHECK(std::fabs(out.sos[k] - f.truth.sos[k]) <= 0.5 * 10 + 1e-12);
  }

  SUBCASE("gd with small rate and no regularization decreases the data loss") {
    InversionConfig cfg = f.config(20);
    cfg.optimizer = OptimizerKind::gd;
    cfg.rates = {1e-4, 1e-4, 1e-2, 1e-3};
    RunLog log;
    nwi_invert(f.dataset[0].measured, f.dataset[0].pulse, f.init, cfg, f.ctx, &log);
    REQUIRE(log.iterations.size() == 20);
    for (size_t i = 1; i < log.iterations.size(); ++i)
      CHECK(log.iterations[i].loss <= log.iterations[i - 1].loss * (1.0 + 1e-9));
  }

  SUBCASE("phase 2 never touches sos or density") {
    InversionConfig cfg = f.config(6);
    cfg.schedule.k1_iters = 3;  // steps 3..5 update attenuation/nonlinearity only
    RunLog log;
    const PropertySet mid = nwi_invert(f.dataset[0].measured, f.dataset[0].pulse, f.init,
                                       [&] {
                                         InversionConfig c2 = cfg;
                                         c2.stop.max_iterations = 3;
                                         c2.schedule.k1_iters = 3;
                                         return c2;
                                       }(),
                                       f.ctx);
    const PropertySet full = nwi_invert(f.dataset[0].measured, f.dataset[0].pulse, f.init, cfg,
                                        f.ctx, &log);
    for (size_t k = 0; k < full.sos.size(); ++k) {
      CHECK(full.sos[k] == mid.sos[k]);
      CHECK(full.density[k] == mid.density[k]);
    }
  }
}

TEST_CASE("multi_pulse_invert contracts") {
  SUBCASE("n_l = 1 equals Algorithm 2 with K * outer iterations, bitwise") {
    InvertFixture f(1);
    InversionConfig cfg = f.config(12);  // 12 total steps
    cfg.inner_steps = 3;
    cfg.outer_iterations = 4;
    cfg.schedule.k1_iters = 7;  // exercise the phase switch too

    const PropertySet multi = multi_pulse_invert(f.dataset, f.init, cfg, f.ctx);

    InversionConfig single = cfg;
    single.stop.max_iterations = 12;
    const PropertySet direct = nwi_invert(f.dataset[0].measured, f.dataset[0].pulse, f.init,
                                          single, f.ctx);
    for (size_t k = 0; k < multi.sos.size(); ++k) {
      CHECK(multi.sos[k] == direct.sos[k]);
      CHECK(multi.density[k] == direct.density[k]);
      CHECK(multi.attenuation[k] == direct.attenuation[k]);
      CHECK(multi.nonlinearity[k] == direct.nonlinearity[k]);
    }
  }

  SUBCASE("two emissions with identical data average to the single result") {
    InvertFixture f(1);
    std::vector<Emission> doubled = {f.dataset[0], f.dataset[0]};
    InversionConfig cfg = f.config(4);
    cfg.inner_steps = 2;
    cfg.outer_iterations = 2;
    cfg.workers = 2;
    const PropertySet avg = multi_pulse_invert(doubled, f.init, cfg, f.ctx);
    const PropertySet one = multi_pulse_invert({f.dataset[0]}, f.init, cfg, f.ctx);
    for (size_t k = 0; k < avg.sos.size(); ++k) {
      CHECK(avg.sos[k] == one.sos[k]);
      CHECK(avg.nonlinearity[k] == one.nonlinearity[k]);
    }
  }

  SUBCASE("result is bit-identical for any worker count") {
    InvertFixture f(2);
    REQUIRE(f.dataset.size() == 2);
    InversionConfig cfg = f.config(4);
    cfg.inner_steps = 2;
    cfg.outer_iterations = 2;

    cfg.workers = 1;
    const PropertySet w1 = multi_pulse_invert(f.dataset, f.init, cfg, f.ctx);
    cfg.workers = 2;
    const PropertySet w2 = multi_pulse_invert(f.dataset, f.init, cfg, f.ctx);
    for (size_t k = 0; k < w1.sos.size(); ++k) {
      CHECK(w1.sos[k] == w2.sos[k]);
      CHECK(w1.density[k] == w2.density[k]);
      CHECK(w1.attenuation[k] == w2.attenuation[k]);
      CHECK(w1.nonlinearity[k] == w2.nonlinearity[k]);
    }
  }

  SUBCASE("the round result is the elementwise average of the worker outputs") {
    InvertFixture f(2);
    InversionConfig cfg = f.config(2);
    cfg.inner_steps = 2;
    cfg.outer_iterations = 1;
    cfg.workers = 2;
    const PropertySet avg = multi_pulse_invert(f.dataset, f.init, cfg, f.ctx);

    // one round by hand: run each emission separately, then average
    InversionConfig single = cfg;
    single.stop.max_iterations = 2;
    const PropertySet a = nwi_invert(f.dataset[0].measured, f.dataset[0].pulse, f.init, single,
                                     f.ctx);
    const PropertySet b = nwi_invert(f.dataset[1].measured, f.dataset[1].pulse, f.init, single,
                                     f.ctx);
    for (size_t k = 0; k < avg.sos.size(); ++k) {
      CHECK(avg.sos[k] == doctest::Approx(0.5 * (a.sos[k] + b.sos[k])).epsilon(1e-15));
      CHECK(avg.density[k] ==
            doctest::Approx(0.5 * (a.density[k] + b.density[k])).epsilon(1e-15));
    }
  }

  SUBCASE("a failing worker aborts the round with its index") {
    InvertFixture f(2);
    std::vector<Emission> broken = f.dataset;
    broken[1].measured = ChannelData(3, 7, f.grid.dt);  // wrong shape
    InversionConfig cfg = f.config(2);
    cfg.inner_steps = 1;
    cfg.outer_iterations = 1;
    cfg.workers = 2;
    try {
      multi_pulse_invert(broken, f.init, cfg, f.ctx);
      FAIL("expected a worker failure");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("worker 1") != std::string::npos);
    }
  }
}

TEST_CASE("a cfl violation mid-run aborts with the step attached") {
  // dt is stable for the init (Cr = 0.69) but one aggressive sos update
  // pushes max(C) past the Cr = 1 bound.
  InvertFixture f(1);
  SimulationGrid edge(14, 14, 40, 5e-4, 0.6 * 5e-4 / 1480.0);
  PhysicsContext ctx = f.ctx;
  ctx.grid = edge;
  ctx.pml = PmlConfig{2, suggested_pml_dmax(1480.0, 2, edge.dx, edge.dt)};
  EmissionPlan plan;
  plan.aperture_elements = 6;
  plan.waveform.f0 = 3e5;
  plan.waveform.amplitude = 5e18;
  plan.focus_depth = 3e-3;
  const PulseField pulse = synthesize_focused(plan, f.geom, edge, 0);
  Field rho(14, 14, 1000.0);
  for (int i = 6; i <= 9; ++i)
    for (int j = 5; j <= 8; ++j) rho(i, j) = 1030.0;
  const PropertySet truth(Field(14, 14, 1480.0), rho, Field(14, 14, 0.0), Field(14, 14, 0.0));
  const ChannelData measured = simulate_channels(truth, pulse, edge, ctx.pml, f.geom);

  InversionConfig cfg = f.config(5);
  cfg.optimizer = OptimizerKind::adam;  // first step moves +-rate per cell
  cfg.rates = {1000.0, 1.0, 1.0, 1.0};  // pushes some sos cell over the bound
  try {
    nwi_invert(measured, pulse, f.init, cfg, ctx);
    FAIL("expected CflViolation");
  } catch (const CflViolation& e) {
    CHECK(e.cr > 1.0);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("every returned property set satisfies the physical bounds") {
  InvertFixture f(1);
  InversionConfig cfg = f.config(8);
  cfg.schedule.k1_iters = 4;
  const PropertySet out = nwi_invert(f.dataset[0].measured, f.dataset[0].pulse, f.init, cfg,
                                     f.ctx);
  CHECK_NOTHROW(PropertySet(out.sos, out.density, out.attenuation, out.nonlinearity));
}
