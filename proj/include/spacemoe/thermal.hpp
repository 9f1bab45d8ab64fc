#pragma once

namespace spacemoe {

inline constexpr double kStefanBoltzmann = 5.670374419e-8;  // W m^-2 K^-4

struct ThermalEnvironment {
  double solar_flux_w_m2 = 1361.0;
  double albedo = 0.3;
  double earth_ir_w_m2 = 237.0;
};

struct ThermalSpec {
  double emissivity = 0.9;
  double radiator_area_m2 = 1.0;
  double radiator_temp_k = 290.0;
  double absorptivity = 0.2;
  double sun_facing_area_m2 = 0.25;
  double earth_facing_area_m2 = 1.0;
  // Baseline electronics dissipation held against the budget before any
  // inference load is admitted.
  double electronics_w = 20.0;
  ThermalEnvironment env{};

  void validate() const;
};

struct ThermalState {
  double p_rad_w = 0.0;
  double p_abs_w = 0.0;
  double budget_w = 0.0;
  double reserved_w = 0.0;   // electronics baseline
  double committed_w = 0.0;  // admitted inference load

  double headroom_w() const { return budget_w - reserved_w - committed_w; }
  // Query only: would `extra_power_w` fit right now.
  bool would_admit(double extra_power_w) const;
  // Commits on success; leaves the state untouched otherwise.
  bool admit(double extra_power_w);
  void reset_commitments() { committed_w = 0.0; }
};

// Flat-plate Earth view factor (R_E / (R_E + h))^2.
double earth_view_factor(double altitude_km);

double radiated_power(const ThermalSpec& spec);
double absorbed_power(const ThermalSpec& spec, bool sunlit, double view_factor);
ThermalState thermal_budget(const ThermalSpec& spec, bool sunlit, double view_factor);

}  // namespace spacemoe
