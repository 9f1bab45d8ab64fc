#include "spacemoe/power.hpp"

#include <algorithm>
#include <cmath>

#include "spacemoe/error.hpp"

namespace spacemoe {

void PowerProfile::validate() const {
  if (solar_panel_w < 0.0 || idle_load_w < 0.0 || compute_w_per_gflops < 0.0 || tx_w_per_gbps < 0.0) {
    throw ParameterError("power profile values must be >= 0");
  }
}

double degradation_increment(double capacity_wh, double discharge_wh, double dod, double c_rate,
                             const DegradationParams& params) {
  if (discharge_wh < 0.0) throw ParameterError("discharge energy must be >= 0");
  if (dod < 0.0 || dod > 1.0) throw ParameterError("depth of discharge must lie in [0, 1]");
  if (c_rate < 0.0) throw ParameterError("c-rate must be >= 0");
  if (discharge_wh == 0.0) return 0.0;
  return params.k_d * (discharge_wh / capacity_wh) * std::pow(dod, params.alpha) *
         std::pow(1.0 + c_rate, params.beta);
}

BatteryState apply_degradation(const BatteryState& b, double discharge_wh, double dod,
                               double c_rate, const DegradationParams& params) {
  BatteryState out = b;
  const double inc = degradation_increment(b.capacity_wh, discharge_wh, dod, c_rate, params);
  if (inc == 0.0) return out;
  out.cumulative_degradation += inc;
  out.health = std::max(params.health_floor, 1.0 - out.cumulative_degradation);
  return out;
}

namespace {

struct Draw {
  EnergyStep step;
  double deficit_soc = 0.0;
};

Draw advance(const BatteryState& b, const PowerProfile& p, bool sunlit, double load_w, double dt,
             const DegradationParams& params) {
  if (!(dt > 0.0)) throw ParameterError("energy step needs dt > 0");
  if (load_w < 0.0) throw ParameterError("load must be >= 0");

  Draw d;
  auto& s = d.step.state;
  auto& led = d.step.ledger;
  s = b;
  const double usable = b.usable_wh();
  led.harvest_w = sunlit ? p.solar_panel_w : 0.0;
  led.load_w = p.idle_load_w + load_w;
  led.harvest_wh = led.harvest_w * dt / 3600.0;
  const double net_w = led.harvest_w - led.load_w;

  if (net_w >= 0.0) {
    const double room_wh = (1.0 - s.soc) * usable;
    led.charge_wh = std::min(net_w * dt / 3600.0, room_wh);
    s.soc = std::min(1.0, s.soc + net_w * dt / (3600.0 * usable));
    if (s.soc >= 1.0) {
      s.soc = 1.0;
      s.anchor_soc = 1.0;
    }
    return d;
  }

  const double want_wh = -net_w * dt / 3600.0;
  double drawn_wh = want_wh;
  double soc_new = s.soc - want_wh / usable;
  if (soc_new < 0.0) {
    d.deficit_soc = -soc_new;
    drawn_wh = s.soc * usable;
    soc_new = 0.0;
    led.brownout = true;
  }
  led.discharge_wh = drawn_wh;
  led.discharge_w = drawn_wh * 3600.0 / dt;
  led.dod = std::clamp(s.anchor_soc - soc_new, 0.0, 1.0);
  led.c_rate = led.discharge_w / usable;
  const double deg_before = s.cumulative_degradation;
  s = apply_degradation(s, drawn_wh, led.dod, led.c_rate, params);
  s.soc = soc_new;
  led.degradation = s.cumulative_degradation - deg_before;
  return d;
}

}  // namespace

EnergyStep step_energy(const BatteryState& b, const PowerProfile& p, bool sunlit, double load_w,
                       double dt, const DegradationParams& params, const std::string& sat, double t) {
  auto d = advance(b, p, sunlit, load_w, dt, params);
  if (d.step.ledger.brownout) throw BrownoutError(sat, t, d.deficit_soc);
  return d.step;
}

EnergyStep step_energy_clamped(const BatteryState& b, const PowerProfile& p, bool sunlit,
                               double load_w, double dt, const DegradationParams& params) {
  return advance(b, p, sunlit, load_w, dt, params).step;
}

double marginal_degradation_cost(const BatteryState& b, const PowerProfile& p, bool sunlit,
                                 double extra_energy_wh, double window_s,
                                 const DegradationParams& params, double base_load_w) {
  if (extra_energy_wh < 0.0) throw ParameterError("extra energy must be >= 0");
  if (!(window_s > 0.0)) throw ParameterError("cost window must be positive");
  const double harvest_w = sunlit ? p.solar_panel_w : 0.0;
  const double base_net_w = harvest_w - p.idle_load_w - base_load_w;
  const double extra_w = extra_energy_wh * 3600.0 / window_s;
  const double usable = b.usable_wh();

  auto degradation_for = [&](double discharge_w) {
    if (discharge_w <= 0.0) return 0.0;
    const double wh = discharge_w * window_s / 3600.0;
    const double soc_new = std::max(0.0, b.soc - wh / usable);
    const double dod = std::clamp(b.anchor_soc - soc_new, 0.0, 1.0);
    return degradation_increment(b.capacity_wh, wh, dod, discharge_w / usable, params);
  };

  const double without = degradation_for(std::max(0.0, -base_net_w));
  const double with = degradation_for(std::max(0.0, extra_w - base_net_w));
  return std::max(0.0, with - without);
}

}  // namespace spacemoe
