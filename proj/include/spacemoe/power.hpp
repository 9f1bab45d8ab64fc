#pragma once

#include <string>

namespace spacemoe {

struct DegradationParams {
  double k_d = 1e-4;
  double alpha = 1.1;  // depth exponent
  double beta = 0.5;   // rate exponent
  double health_floor = 0.6;
};

struct BatteryState {
  double capacity_wh = 1000.0;  // nameplate
  double soc = 1.0;
  double health = 1.0;
  double cumulative_degradation = 0.0;
  // State of charge at the last full-charge mark; depth of discharge is
  // measured from here.
  double anchor_soc = 1.0;

  double usable_wh() const { return capacity_wh * health; }
};

struct PowerProfile {
  double solar_panel_w = 800.0;
  double idle_load_w = 300.0;
  double compute_w_per_gflops = 0.05;
  double tx_w_per_gbps = 5.0;

  void validate() const;
};

struct EnergyLedger {
  double harvest_w = 0.0;
  double load_w = 0.0;
  double discharge_w = 0.0;
  double harvest_wh = 0.0;
  double charge_wh = 0.0;     // energy stored (after clipping)
  double discharge_wh = 0.0;  // energy drawn from the battery
  double dod = 0.0;
  double c_rate = 0.0;
  double degradation = 0.0;   // increment applied this step
  bool brownout = false;
};

struct EnergyStep {
  BatteryState state;
  EnergyLedger ledger;
};

// Degradation increment for one discharge event.
double degradation_increment(double capacity_wh, double discharge_wh, double dod, double c_rate,
                             const DegradationParams& params);

BatteryState apply_degradation(const BatteryState& b, double discharge_wh, double dod,
                               double c_rate, const DegradationParams& params = {});

// Advances the battery by dt under the given load. Throws BrownoutError when
// the battery cannot cover the deficit.
EnergyStep step_energy(const BatteryState& b, const PowerProfile& p, bool sunlit, double load_w,
                       double dt, const DegradationParams& params = {},
                       const std::string& sat = {}, double t = 0.0);

// Same as step_energy but drains to empty and flags the ledger instead of
// throwing.
EnergyStep step_energy_clamped(const BatteryState& b, const PowerProfile& p, bool sunlit,
                               double load_w, double dt, const DegradationParams& params = {});

// Degradation caused by adding extra_energy_wh spread over window_s on top of
// base_load_w. Zero when the harvest surplus covers the extra load.
double marginal_degradation_cost(const BatteryState& b, const PowerProfile& p, bool sunlit,
                                 double extra_energy_wh, double window_s,
                                 const DegradationParams& params = {}, double base_load_w = 0.0);

}  // namespace spacemoe
