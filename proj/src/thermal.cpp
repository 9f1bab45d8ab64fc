#include "spacemoe/thermal.hpp"

#include "spacemoe/constellation.hpp"
#include "spacemoe/error.hpp"

namespace spacemoe {

void ThermalSpec::validate() const {
  if (!(emissivity > 0.0 && emissivity <= 1.0)) throw ParameterError("emissivity must lie in (0, 1]");
  if (!(absorptivity > 0.0 && absorptivity <= 1.0)) throw ParameterError("absorptivity must lie in (0, 1]");
  if (radiator_area_m2 < 0.0 || sun_facing_area_m2 < 0.0 || earth_facing_area_m2 < 0.0) {
    throw ParameterError("thermal areas must be >= 0");
  }
  if (radiator_temp_k < 0.0) throw ParameterError("radiator temperature must be >= 0 K");
  if (electronics_w < 0.0) throw ParameterError("electronics dissipation must be >= 0");
}

bool ThermalState::would_admit(double extra_power_w) const {
  if (extra_power_w < 0.0) throw ParameterError("admission request must be >= 0 W");
  if (extra_power_w == 0.0) return true;
  return committed_w + extra_power_w <= budget_w - reserved_w;
}

bool ThermalState::admit(double extra_power_w) {
  if (!would_admit(extra_power_w)) return false;
  committed_w += extra_power_w;
  return true;
}

double earth_view_factor(double altitude_km) {
  const double ratio = kEarthRadiusKm / (kEarthRadiusKm + altitude_km);
  return ratio * ratio;
}

double radiated_power(const ThermalSpec& spec) {
  const double t2 = spec.radiator_temp_k * spec.radiator_temp_k;
  return spec.emissivity * kStefanBoltzmann * spec.radiator_area_m2 * t2 * t2;
}

double absorbed_power(const ThermalSpec& spec, bool sunlit, double view_factor) {
  if (view_factor < 0.0 || view_factor > 1.0) throw ParameterError("view factor must lie in [0, 1]");
  const auto& env = spec.env;
  double p = spec.emissivity * env.earth_ir_w_m2 * spec.earth_facing_area_m2 * view_factor;
  if (sunlit) {
    p += env.solar_flux_w_m2 * spec.absorptivity * spec.sun_facing_area_m2;
    p += env.albedo * env.solar_flux_w_m2 * spec.absorptivity * spec.earth_facing_area_m2 * view_factor;
  }
  return p;
}

ThermalState thermal_budget(const ThermalSpec& spec, bool sunlit, double view_factor) {
  ThermalState s;
  s.p_rad_w = radiated_power(spec);
  s.p_abs_w = absorbed_power(spec, sunlit, view_factor);
  s.budget_w = s.p_rad_w - s.p_abs_w;
  s.reserved_w = spec.electronics_w;
  return s;
}

}  // namespace spacemoe
