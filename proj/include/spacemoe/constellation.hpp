#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace spacemoe {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kEarthMuKm3S2 = 398600.4418;
inline constexpr double kLightSpeedKmS = 299792.458;

using Vec3 = std::array<double, 3>;

double dot(const Vec3& a, const Vec3& b);
double norm(const Vec3& a);
double distance(const Vec3& a, const Vec3& b);
Vec3 normalized(const Vec3& a);

struct SatelliteId {
  int shell = 0;
  int plane = 0;
  int slot = 0;

  auto operator<=>(const SatelliteId&) const = default;

  // "sat-<shell>-<plane>-<slot>"
  std::string str() const;
  static SatelliteId parse(const std::string& text);
};

std::ostream& operator<<(std::ostream& os, const SatelliteId& id);

struct WalkerShell {
  int planes = 1;
  int sats_per_plane = 1;
  double altitude_km = 550.0;
  double inclination_deg = 53.0;
  int phasing_factor = 0;
  double raan_offset_deg = 0.0;
  int shell_id = 0;

  void validate() const;
  double semi_major_axis_km() const { return kEarthRadiusKm + altitude_km; }
  double period_s() const;
  int size() const { return planes * sats_per_plane; }
};

double orbital_period_s(double altitude_km);

struct EciPosition {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double t = 0.0;

  Vec3 vec() const { return {x, y, z}; }
};

struct SatellitePosition {
  SatelliteId id;
  EciPosition pos;
};

// Circular two-body propagation of every satellite in the shell, ordered by
// (plane, slot).
std::vector<SatellitePosition> propagate(const WalkerShell& shell, double t);

// Argument of latitude (rad) of a satellite at time t.
double argument_of_latitude(const WalkerShell& shell, int plane, int slot, double t);

struct IslPolicy {
  double isl_rate_bps = 10e9;
  bool cross_shell = false;
  double cross_shell_rate_bps = 5e9;
};

struct Link {
  std::size_t a = 0;  // node indices, a < b
  std::size_t b = 0;
  double propagation_delay_s = 0.0;
  double data_rate_bps = 0.0;
};

// Connectivity graph frozen at time t. Node order is the input order of the
// positions, so snapshots built from the same shells share indices.
struct TopologySnapshot {
  double t = 0.0;
  std::vector<SatelliteId> nodes;
  std::vector<Vec3> positions;
  std::vector<Link> links;
  std::vector<bool> sunlit;

  std::size_t index_of(const SatelliteId& id) const;
  bool contains(const SatelliteId& id) const;
  std::size_t size() const { return nodes.size(); }
  // Link between node indices, or nullptr.
  const Link* find_link(std::size_t a, std::size_t b) const;
  std::vector<std::vector<std::size_t>> adjacency() const;  // link ids per node
};

// +Grid: two intra-plane neighbours plus one neighbour in each adjacent plane.
// The adjacent-plane partner is the slot shift minimizing the summed
// inter-plane distance, which keeps the pairing one-to-one.
TopologySnapshot build_topology(const std::vector<SatellitePosition>& positions,
                                const std::vector<WalkerShell>& shells,
                                const IslPolicy& policy,
                                const Vec3& sun_direction);

// Cylindrical Earth shadow.
bool sunlit(const EciPosition& position, const Vec3& sun_direction);

struct GroundStation {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
};

// Non-rotating Earth: station fixed in the inertial frame.
double elevation_deg(const EciPosition& position, const GroundStation& station);
bool ground_visibility(const EciPosition& position, const GroundStation& station,
                       double min_elevation_deg);

// Fraction of one period spent in shadow, sampled at `samples` points.
double eclipse_fraction(const WalkerShell& shell, int plane, int slot,
                        const Vec3& sun_direction, int samples = 20000);

// Propagates all shells and builds a snapshot at time t.
TopologySnapshot snapshot_at(const std::vector<WalkerShell>& shells, double t,
                             const IslPolicy& policy, const Vec3& sun_direction);

// CSV rows `t,sat_id,x_km,y_km,z_km,sunlit` (no header).
void write_snapshot_rows(std::ostream& os, const TopologySnapshot& snap);

}  // namespace spacemoe
