#include <doctest.h>

#include <cmath>
#include <random>

#include "spacemoe/constellation.hpp"
#include "spacemoe/error.hpp"
#include "spacemoe/power.hpp"
#include "spacemoe/thermal.hpp"

using namespace spacemoe;

namespace {

PowerProfile bare_profile() {
  PowerProfile p;
  p.solar_panel_w = 0.0;
  p.idle_load_w = 0.0;
  return p;
}

// Degradation law written out independently of the library.
double law(double cap, double wh, double dod, double c, double k = 1e-4, double a = 1.1, double b = 0.5) {
  return k * (wh / cap) * std::pow(dod, a) * std::pow(1.0 + c, b);
}

}  // namespace

TEST_SUITE("power") {

TEST_CASE("sunlit with no demand never discharges") {
  PowerProfile p = bare_profile();
  p.solar_panel_w = 500.0;
  BatteryState b;
  b.soc = 0.4;
  const auto step = step_energy(b, p, true, 0.0, 60.0);
  CHECK(step.state.soc >= b.soc);
  CHECK(step.ledger.discharge_wh == 0.0);
  CHECK(step.ledger.harvest_w == 500.0);
}

TEST_CASE("100 W for 360 s from 100 Wh drops soc by 0.1") {
  BatteryState b;
  b.capacity_wh = 100.0;
  const auto step = step_energy(b, bare_profile(), false, 100.0, 360.0);
  CHECK(b.soc - step.state.soc == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(step.ledger.discharge_wh == doctest::Approx(10.0));
}

TEST_CASE("brownout names the satellite and time") {
  BatteryState b;
  b.capacity_wh = 100.0;
  b.soc = 0.01;
  // 0.02 * 100 Wh = 2 Wh over 72 s = 100 W
  try {
    step_energy(b, bare_profile(), false, 100.0, 72.0, {}, "sat-0-1-2", 30.0);
    FAIL("expected brownout");
  } catch (const BrownoutError& e) {
    CHECK(e.satellite() == "sat-0-1-2");
    CHECK(e.time() == 30.0);
    CHECK(e.deficit_soc() == doctest::Approx(0.01));
  }
  const auto clamped = step_energy_clamped(b, bare_profile(), false, 100.0, 72.0);
  CHECK(clamped.ledger.brownout);
  CHECK(clamped.state.soc == 0.0);
}

TEST_CASE("invalid step inputs") {
  BatteryState b;
  CHECK_THROWS_AS(step_energy(b, bare_profile(), true, 0.0, 0.0), ParameterError);
  CHECK_THROWS_AS(step_energy(b, bare_profile(), true, -1.0, 1.0), ParameterError);
}

TEST_CASE("zero throughput leaves the battery unchanged") {
  BatteryState b;
  b.cumulative_degradation = 0.01;
  b.health = 0.99;
  const auto out = apply_degradation(b, 0.0, 0.5, 1.0);
  CHECK(out.cumulative_degradation == b.cumulative_degradation);
  CHECK(out.health == b.health);
}

TEST_CASE("depth and rate ratios follow the power law") {
  BatteryState b;
  const double deep = apply_degradation(b, 50.0, 0.8, 0.5).cumulative_degradation;
  const double shallow = apply_degradation(b, 50.0, 0.2, 0.5).cumulative_degradation;
  CHECK(deep / shallow == doctest::Approx(4.59).epsilon(1e-2 / 4.59));
  CHECK(deep / shallow == doctest::Approx(std::pow(4.0, 1.1)).epsilon(1e-12));

  const double fast = apply_degradation(b, 50.0, 0.5, 3.0).cumulative_degradation;
  const double slow = apply_degradation(b, 50.0, 0.5, 1.0).cumulative_degradation;
  CHECK(fast / slow == doctest::Approx(1.414).epsilon(1e-3 / 1.414));
  CHECK(apply_degradation(b, 50.0, 0.5, 1.0).cumulative_degradation ==
        doctest::Approx(law(1000.0, 50.0, 0.5, 1.0)).epsilon(1e-12));
}

TEST_CASE("degradation strictly increases in throughput, depth and rate") {
  BatteryState b;
  for (double v : {0.1, 0.3, 0.6}) {
    CHECK(degradation_increment(1000, 10 * v, 0.5, 1, {}) < degradation_increment(1000, 10 * (v + 0.1), 0.5, 1, {}));
    CHECK(degradation_increment(1000, 10, v, 1, {}) < degradation_increment(1000, 10, v + 0.1, 1, {}));
    CHECK(degradation_increment(1000, 10, 0.5, v, {}) < degradation_increment(1000, 10, 0.5, v + 0.1, {}));
  }
}

TEST_CASE("health is floored") {
  BatteryState b;
  DegradationParams params;
  params.k_d = 10.0;
  const auto out = apply_degradation(b, 1000.0, 1.0, 1.0, params);
  CHECK(out.health == params.health_floor);
  CHECK(out.cumulative_degradation > 0.4);
}

TEST_CASE("energy conservation and non-increasing health over a random trajectory") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> load(0.0, 900.0);
  PowerProfile p;
  BatteryState b;
  b.capacity_wh = 2000.0;
  for (int i = 0; i < 2000; ++i) {
    const bool sun = (i / 50) % 3 != 0;
    const double l = load(rng);
    const auto step = step_energy_clamped(b, p, sun, l, 10.0);
    const double expected_wh = ((sun ? p.solar_panel_w : 0.0) - p.idle_load_w - l) * 10.0 / 3600.0;
    const double stored_wh = (step.state.soc - b.soc) * b.capacity_wh * b.health;
    const bool clipped = step.state.soc == 1.0 || step.ledger.brownout;
    if (!clipped) CHECK(std::abs(stored_wh - expected_wh) <= 1e-9 * std::max(1.0, std::abs(expected_wh)));
    CHECK(step.state.health <= b.health);
    CHECK(step.state.soc >= 0.0);
    CHECK(step.state.soc <= 1.0);
    b = step.state;
  }
}

TEST_CASE("depth of discharge is measured from the last full charge") {
  PowerProfile p = bare_profile();
  BatteryState b;
  b.capacity_wh = 100.0;
  auto s1 = step_energy(b, p, false, 100.0, 360.0);  // 1.0 -> 0.9
  CHECK(s1.ledger.dod == doctest::Approx(0.1));
  auto s2 = step_energy(s1.state, p, false, 100.0, 360.0);  // 0.9 -> 0.8
  CHECK(s2.ledger.dod == doctest::Approx(0.2));
  p.solar_panel_w = 1000.0;
  auto s3 = step_energy(s2.state, p, true, 0.0, 3600.0);  // full again
  CHECK(s3.state.soc == 1.0);
  p.solar_panel_w = 0.0;
  auto s4 = step_energy(s3.state, p, false, 100.0, 360.0);
  CHECK(s4.ledger.dod == doctest::Approx(0.1));
}

TEST_CASE("marginal degradation cost") {
  PowerProfile p;  // 800 W panel, 300 W idle
  BatteryState b;
  CHECK(marginal_degradation_cost(b, p, true, 0.5, 10.0) == 0.0);  // 180 W extra < 500 W surplus
  CHECK(marginal_degradation_cost(b, p, false, 1e-6, 10.0) > 0.0);
  double prev = 0.0;
  for (double wh : {0.1, 0.5, 2.0}) {
    const double c = marginal_degradation_cost(b, p, false, wh, 10.0);
    CHECK(c >= prev);
    prev = c;
  }
  // brute force: eclipse with idle 300 W, extra E Wh over 10 s
  const double extra_w = 0.5 * 3600.0 / 10.0;
  auto deg = [&](double w) {
    const double wh = w * 10.0 / 3600.0;
    return law(1000.0, wh, wh / 1000.0, w / 1000.0);
  };
  CHECK(marginal_degradation_cost(b, p, false, 0.5, 10.0) ==
        doctest::Approx(deg(300.0 + extra_w) - deg(300.0)).epsilon(1e-9));
  CHECK_THROWS_AS(marginal_degradation_cost(b, p, false, -1.0, 10.0), ParameterError);
}

}  // TEST_SUITE

TEST_SUITE("thermal") {

TEST_CASE("radiated power") {
  ThermalSpec spec;
  CHECK(radiated_power(spec) == doctest::Approx(360.9).epsilon(0.1 / 360.9));
  CHECK(radiated_power(spec) == doctest::Approx(0.9 * 5.670374419e-8 * std::pow(290.0, 4)).epsilon(1e-12));
  const double one = radiated_power(spec);
  spec.radiator_area_m2 = 2.0;
  CHECK(radiated_power(spec) == 2.0 * one);
  spec.radiator_temp_k = 0.0;
  CHECK(radiated_power(spec) == 0.0);
}

TEST_CASE("absorbed power") {
  ThermalSpec spec;
  CHECK(absorbed_power(spec, false, 0.0) == 0.0);
  const double vf = earth_view_factor(550.0);
  CHECK(vf == doctest::Approx(0.8473).epsilon(1e-4));
  CHECK(absorbed_power(spec, false, vf) == doctest::Approx(180.7).epsilon(0.5 / 180.7));
  CHECK(absorbed_power(spec, false, vf) == doctest::Approx(237.0 * 0.9 * vf).epsilon(1e-12));

  ThermalSpec sun_only;
  sun_only.absorptivity = 0.3;
  sun_only.sun_facing_area_m2 = 1.0;
  sun_only.earth_facing_area_m2 = 0.0;
  CHECK(absorbed_power(sun_only, true, vf) == doctest::Approx(408.3).epsilon(0.1 / 408.3));
  CHECK_THROWS_AS(absorbed_power(spec, true, 1.5), ParameterError);
}

TEST_CASE("eclipse budget composes the two oracles") {
  ThermalSpec spec;
  const auto st = thermal_budget(spec, false, earth_view_factor(550.0));
  CHECK(st.budget_w == doctest::Approx(180.2).epsilon(0.6 / 180.2));
  CHECK(st.budget_w == st.p_rad_w - st.p_abs_w);
  CHECK(st.reserved_w == spec.electronics_w);
  CHECK(st.headroom_w() == doctest::Approx(180.2 - spec.electronics_w).epsilon(0.6 / 160.2));
}

TEST_CASE("budget ordering in radiator temperature, sunlight and absorptivity") {
  const double vf = earth_view_factor(550.0);
  for (bool sun : {false, true}) {
    double prev = -1e9;
    for (double ts : {270.0, 290.0, 310.0}) {
      ThermalSpec spec;
      spec.radiator_temp_k = ts;
      const double b = thermal_budget(spec, sun, vf).budget_w;
      CHECK(b > prev);
      prev = b;
    }
  }
  ThermalSpec spec;
  CHECK(thermal_budget(spec, true, vf).budget_w < thermal_budget(spec, false, vf).budget_w);
  ThermalSpec hot = spec;
  hot.absorptivity = 0.5;
  CHECK(thermal_budget(hot, true, vf).budget_w < thermal_budget(spec, true, vf).budget_w);
}

TEST_CASE("admission running sum") {
  ThermalState st;
  st.budget_w = 100.0;
  CHECK(st.admit(0.0));
  st.committed_w = 60.0;
  CHECK_FALSE(st.admit(50.0));
  CHECK(st.committed_w == 60.0);
  st.reset_commitments();
  CHECK(st.admit(60.0));
  CHECK(st.admit(40.0));
  CHECK_FALSE(st.admit(1.0));
  CHECK(st.committed_w == 100.0);
  CHECK_THROWS_AS(st.admit(-1.0), ParameterError);
}

TEST_CASE("negative budget admits only zero") {
  ThermalState st;
  st.budget_w = -5.0;
  CHECK(st.admit(0.0));
  CHECK_FALSE(st.admit(0.1));
  CHECK(st.committed_w <= std::max(st.budget_w, 0.0));
}

TEST_CASE("admission never over-commits") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> req(0.0, 30.0), bud(-20.0, 200.0);
  for (int trial = 0; trial < 200; ++trial) {
    ThermalState st;
    st.budget_w = bud(rng);
    st.reserved_w = trial % 2 ? 20.0 : 0.0;
    for (int i = 0; i < 50; ++i) {
      st.admit(req(rng));
      CHECK(st.committed_w <= std::max(st.budget_w, 0.0));
    }
  }
}

TEST_CASE("spec validation") {
  ThermalSpec spec;
  spec.emissivity = 1.2;
  CHECK_THROWS_AS(spec.validate(), ParameterError);
  spec = ThermalSpec{};
  spec.radiator_area_m2 = -1.0;
  CHECK_THROWS_AS(spec.validate(), ParameterError);
  spec = ThermalSpec{};
  spec.absorptivity = 0.0;
  CHECK_THROWS_AS(spec.validate(), ParameterError);
}

}  // TEST_SUITE
