#include "spacemoe/constellation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "spacemoe/error.hpp"

namespace spacemoe {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

double distance(const Vec3& a, const Vec3& b) {
  return norm({a[0] - b[0], a[1] - b[1], a[2] - b[2]});
}

Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  if (n <= 0.0) throw ParameterError("cannot normalize a zero vector");
  return {a[0] / n, a[1] / n, a[2] / n};
}

std::string SatelliteId::str() const {
  return "sat-" + std::to_string(shell) + "-" + std::to_string(plane) + "-" +
         std::to_string(slot);
}

SatelliteId SatelliteId::parse(const std::string& text) {
  SatelliteId id;
  char dash1 = 0, dash2 = 0, dash3 = 0;
  std::istringstream in(text);
  std::string prefix(4, '\0');
  in.read(prefix.data(), 3);
  prefix.resize(3);
  if (prefix != "sat" || !(in >> dash1 >> id.shell >> dash2 >> id.plane >> dash3 >> id.slot) ||
      dash1 != '-' || dash2 != '-' || dash3 != '-' || in.peek() != std::char_traits<char>::eof()) {
    throw ParameterError("malformed satellite id '" + text + "' (expected sat-<shell>-<plane>-<slot>)");
  }
  if (id.shell < 0 || id.plane < 0 || id.slot < 0) {
    throw ParameterError("negative index in satellite id '" + text + "'");
  }
  return id;
}

std::ostream& operator<<(std::ostream& os, const SatelliteId& id) { return os << id.str(); }

void WalkerShell::validate() const {
  if (planes < 1) throw ParameterError("shell needs at least one plane");
  if (sats_per_plane < 1) throw ParameterError("shell needs at least one satellite per plane");
  if (!(altitude_km > 0.0)) throw ParameterError("shell altitude must be positive");
  if (inclination_deg < 0.0 || inclination_deg > 180.0) {
    throw ParameterError("inclination must lie in [0, 180] degrees");
  }
  if (phasing_factor < 0 || phasing_factor >= planes) {
    throw ParameterError("phasing factor must lie in [0, planes)");
  }
}

double orbital_period_s(double altitude_km) {
  const double a = kEarthRadiusKm + altitude_km;
  return 2.0 * std::numbers::pi * std::sqrt(a * a * a / kEarthMuKm3S2);
}

double WalkerShell::period_s() const { return orbital_period_s(altitude_km); }

double argument_of_latitude(const WalkerShell& shell, int plane, int slot, double t) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double in_plane = two_pi * slot / shell.sats_per_plane;
  const double phasing =
      two_pi * shell.phasing_factor * plane / (static_cast<double>(shell.planes) * shell.sats_per_plane);
  // Reduce the time term first so t and t + T land on the same angle.
  const double frac = std::fmod(t / shell.period_s(), 1.0);
  return in_plane + phasing + two_pi * frac;
}

std::vector<SatellitePosition> propagate(const WalkerShell& shell, double t) {
  shell.validate();
  if (t < 0.0) throw ParameterError("propagation time must be non-negative");
  const double r = shell.semi_major_axis_km();
  const double inc = shell.inclination_deg * kDeg;
  const double ci = std::cos(inc), si = std::sin(inc);

  std::vector<SatellitePosition> out;
  out.reserve(static_cast<std::size_t>(shell.size()));
  for (int p = 0; p < shell.planes; ++p) {
    const double raan = (shell.raan_offset_deg + 360.0 * p / shell.planes) * kDeg;
    const double co = std::cos(raan), so = std::sin(raan);
    for (int s = 0; s < shell.sats_per_plane; ++s) {
      const double u = argument_of_latitude(shell, p, s, t);
      const double cu = std::cos(u), su = std::sin(u);
      EciPosition pos;
      pos.x = r * (co * cu - so * su * ci);
      pos.y = r * (so * cu + co * su * ci);
      pos.z = r * (su * si);
      pos.t = t;
      out.push_back({SatelliteId{shell.shell_id, p, s}, pos});
    }
  }
  return out;
}

std::size_t TopologySnapshot::index_of(const SatelliteId& id) const {
  const auto it = std::lower_bound(nodes.begin(), nodes.end(), id);
  if (it != nodes.end() && *it == id) return static_cast<std::size_t>(it - nodes.begin());
  // Snapshots built from relabelled or unsorted inputs fall back to a scan.
  const auto lin = std::find(nodes.begin(), nodes.end(), id);
  if (lin == nodes.end()) throw ParameterError("satellite " + id.str() + " not in snapshot");
  return static_cast<std::size_t>(lin - nodes.begin());
}

bool TopologySnapshot::contains(const SatelliteId& id) const {
  return std::find(nodes.begin(), nodes.end(), id) != nodes.end();
}

const Link* TopologySnapshot::find_link(std::size_t a, std::size_t b) const {
  if (a > b) std::swap(a, b);
  for (const auto& l : links) {
    if (l.a == a && l.b == b) return &l;
  }
  return nullptr;
}

std::vector<std::vector<std::size_t>> TopologySnapshot::adjacency() const {
  std::vector<std::vector<std::size_t>> adj(nodes.size());
  for (std::size_t i = 0; i < links.size(); ++i) {
    adj[links[i].a].push_back(i);
    adj[links[i].b].push_back(i);
  }
  return adj;
}

bool sunlit(const EciPosition& position, const Vec3& sun_direction) {
  const Vec3 r = position.vec();
  const double along_sun = dot(r, sun_direction);
  if (along_sun >= 0.0) return true;
  const double r2 = dot(r, r);
  const double axis_dist2 = r2 - along_sun * along_sun;
  return axis_dist2 >= kEarthRadiusKm * kEarthRadiusKm;
}

TopologySnapshot build_topology(const std::vector<SatellitePosition>& positions,
                                const std::vector<WalkerShell>& shells,
                                const IslPolicy& policy,
                                const Vec3& sun_direction) {
  TopologySnapshot snap;
  snap.t = positions.empty() ? 0.0 : positions.front().pos.t;
  snap.nodes.reserve(positions.size());
  for (const auto& sp : positions) {
    snap.nodes.push_back(sp.id);
    snap.positions.push_back(sp.pos.vec());
    snap.sunlit.push_back(sunlit(sp.pos, sun_direction));
  }

  // (shell, plane, slot) -> node index
  auto lookup = [&](int shell, int plane, int slot) -> std::size_t {
    return snap.index_of(SatelliteId{shell, plane, slot});
  };

  std::set<std::pair<std::size_t, std::size_t>> seen;
  auto add_link = [&](std::size_t a, std::size_t b, double rate) {
    if (a == b) return;
    if (a > b) std::swap(a, b);
    if (!seen.insert({a, b}).second) return;
    const double d = distance(snap.positions[a], snap.positions[b]);
    snap.links.push_back({a, b, d / kLightSpeedKmS, rate});
  };

  for (const auto& shell : shells) {
    const int P = shell.planes, S = shell.sats_per_plane;
    for (int p = 0; p < P; ++p) {
      for (int s = 0; s < S; ++s) {
        add_link(lookup(shell.shell_id, p, s), lookup(shell.shell_id, p, (s + 1) % S),
                 policy.isl_rate_bps);
      }
    }
    const int plane_pairs = P >= 3 ? P : P - 1;
    for (int p = 0; p < plane_pairs; ++p) {
      const int q = (p + 1) % P;
      int best_shift = 0;
      double best_cost = std::numeric_limits<double>::infinity();
      for (int k = 0; k < S; ++k) {
        double cost = 0.0;
        for (int s = 0; s < S; ++s) {
          cost += distance(snap.positions[lookup(shell.shell_id, p, s)],
                           snap.positions[lookup(shell.shell_id, q, (s + k) % S)]);
        }
        if (cost < best_cost) {
          best_cost = cost;
          best_shift = k;
        }
      }
      for (int s = 0; s < S; ++s) {
        add_link(lookup(shell.shell_id, p, s), lookup(shell.shell_id, q, (s + best_shift) % S),
                 policy.isl_rate_bps);
      }
    }
  }

  if (policy.cross_shell && shells.size() > 1) {
    std::vector<const WalkerShell*> by_alt;
    for (const auto& s : shells) by_alt.push_back(&s);
    std::stable_sort(by_alt.begin(), by_alt.end(), [](const WalkerShell* a, const WalkerShell* b) {
      return a->altitude_km < b->altitude_km;
    });
    for (std::size_t i = 0; i + 1 < by_alt.size(); ++i) {
      const int lower = by_alt[i]->shell_id, upper = by_alt[i + 1]->shell_id;
      for (std::size_t a = 0; a < snap.nodes.size(); ++a) {
        if (snap.nodes[a].shell != lower) continue;
        std::size_t best = snap.nodes.size();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < snap.nodes.size(); ++b) {
          if (snap.nodes[b].shell != upper) continue;
          const double d = distance(snap.positions[a], snap.positions[b]);
          if (d < best_d) {
            best_d = d;
            best = b;
          }
        }
        if (best < snap.nodes.size()) add_link(a, best, policy.cross_shell_rate_bps);
      }
    }
  }
  return snap;
}

double elevation_deg(const EciPosition& position, const GroundStation& station) {
  const double lat = station.lat_deg * kDeg, lon = station.lon_deg * kDeg;
  const Vec3 up{std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
  const Vec3 g{kEarthRadiusKm * up[0], kEarthRadiusKm * up[1], kEarthRadiusKm * up[2]};
  const Vec3 p = position.vec();
  const Vec3 rel{p[0] - g[0], p[1] - g[1], p[2] - g[2]};
  const double range = norm(rel);
  if (range <= 0.0) return 90.0;
  const double s = std::clamp(dot(rel, up) / range, -1.0, 1.0);
  return std::asin(s) / kDeg;
}

bool ground_visibility(const EciPosition& position, const GroundStation& station,
                       double min_elevation_deg) {
  if (station.lat_deg < -90.0 || station.lat_deg > 90.0) {
    throw ParameterError("station latitude must lie in [-90, 90]");
  }
  return elevation_deg(position, station) >= min_elevation_deg;
}

double eclipse_fraction(const WalkerShell& shell, int plane, int slot, const Vec3& sun_direction,
                        int samples) {
  const double period = shell.period_s();
  const std::size_t idx = static_cast<std::size_t>(plane * shell.sats_per_plane + slot);
  int dark = 0;
  for (int i = 0; i < samples; ++i) {
    const double t = period * i / samples;
    const auto pos = propagate(shell, t);
    if (!sunlit(pos[idx].pos, sun_direction)) ++dark;
  }
  return static_cast<double>(dark) / samples;
}

TopologySnapshot snapshot_at(const std::vector<WalkerShell>& shells, double t,
                             const IslPolicy& policy, const Vec3& sun_direction) {
  std::vector<SatellitePosition> all;
  for (const auto& shell : shells) {
    auto pos = propagate(shell, t);
    all.insert(all.end(), pos.begin(), pos.end());
  }
  std::sort(all.begin(), all.end(),
            [](const SatellitePosition& a, const SatellitePosition& b) { return a.id < b.id; });
  auto snap = build_topology(all, shells, policy, sun_direction);
  snap.t = t;
  return snap;
}

void write_snapshot_rows(std::ostream& os, const TopologySnapshot& snap) {
  for (std::size_t i = 0; i < snap.nodes.size(); ++i) {
    os << snap.t << ',' << snap.nodes[i].str() << ',' << snap.positions[i][0] << ','
       << snap.positions[i][1] << ',' << snap.positions[i][2] << ',' << (snap.sunlit[i] ? 1 : 0)
       << '\n';
  }
}

}  // namespace spacemoe
