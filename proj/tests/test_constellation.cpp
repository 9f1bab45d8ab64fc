#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "spacemoe/constellation.hpp"
#include "spacemoe/error.hpp"

using namespace spacemoe;

namespace {

WalkerShell desk_shell() { return WalkerShell{6, 11, 550.0, 53.0, 1, 0.0, 0}; }

}  // namespace

TEST_SUITE("constellation") {

TEST_CASE("period at 550 km follows Kepler's third law") {
  // independent: T = 2*pi*sqrt(a^3/mu)
  const double a = 6371.0 + 550.0;
  const double expected = 2.0 * std::numbers::pi * std::sqrt(a * a * a / 398600.4418);
  CHECK(orbital_period_s(550.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(orbital_period_s(550.0) - 5730.1) < 1.0);
}

TEST_CASE("epoch places plane 0 slot 0 on the ascending node") {
  const auto shell = desk_shell();
  CHECK(argument_of_latitude(shell, 0, 0, 0.0) == doctest::Approx(0.0));
  const auto pos = propagate(shell, 0.0);
  REQUIRE(pos.size() == 66);
  CHECK(pos[0].id == SatelliteId{0, 0, 0});
  // RAAN 0, u = 0: on the x axis
  CHECK(pos[0].pos.x == doctest::Approx(6921.0));
  CHECK(std::abs(pos[0].pos.y) < 1e-9);
  CHECK(std::abs(pos[0].pos.z) < 1e-9);
}

TEST_CASE("positions are periodic and stay on the orbit sphere") {
  const auto shell = desk_shell();
  const double T = shell.period_s();
  for (double t : {0.0, 123.4, 2000.0, 5000.0}) {
    const auto a = propagate(shell, t);
    const auto b = propagate(shell, t + T);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(distance(a[i].pos.vec(), b[i].pos.vec()) < 1e-6);
      CHECK(std::abs(norm(a[i].pos.vec()) - 6921.0) / 6921.0 < 1e-6);
    }
  }
}

TEST_CASE("walker phasing offsets adjacent planes") {
  WalkerShell shell{4, 5, 550.0, 53.0, 2, 0.0, 0};
  // u(p, s) = 2*pi*s/S + 2*pi*F*p/(P*S)
  const double expected = 2.0 * std::numbers::pi * 2.0 * 1.0 / 20.0;
  CHECK(argument_of_latitude(shell, 1, 0, 0.0) == doctest::Approx(expected));
}

TEST_CASE("desk +Grid has degree 4 and 132 links") {
  const auto snap = snapshot_at({desk_shell()}, 0.0, IslPolicy{}, {1, 0, 0});
  CHECK(snap.size() == 66);
  CHECK(snap.links.size() == 132);
  std::vector<int> degree(snap.size(), 0);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& l : snap.links) {
    CHECK(l.a < l.b);
    CHECK(seen.insert({l.a, l.b}).second);
    ++degree[l.a];
    ++degree[l.b];
    CHECK(l.propagation_delay_s > 0.0);
    CHECK(l.propagation_delay_s ==
          doctest::Approx(distance(snap.positions[l.a], snap.positions[l.b]) / kLightSpeedKmS).epsilon(1e-12));
  }
  for (int d : degree) CHECK(d == 4);
}

TEST_CASE("topology stays degree 4 over an orbit") {
  const auto shell = desk_shell();
  for (double t = 0.0; t < shell.period_s(); t += 600.0) {
    const auto snap = snapshot_at({shell}, t, IslPolicy{}, {1, 0, 0});
    std::vector<int> degree(snap.size(), 0);
    for (const auto& l : snap.links) {
      ++degree[l.a];
      ++degree[l.b];
    }
    for (int d : degree) CHECK(d == 4);
  }
}

TEST_CASE("find_link is symmetric") {
  const auto snap = snapshot_at({desk_shell()}, 77.0, IslPolicy{}, {1, 0, 0});
  for (const auto& l : snap.links) {
    const Link* ab = snap.find_link(l.a, l.b);
    const Link* ba = snap.find_link(l.b, l.a);
    REQUIRE(ab != nullptr);
    REQUIRE(ba != nullptr);
    CHECK(ab->propagation_delay_s == ba->propagation_delay_s);
    CHECK(ab->data_rate_bps == ba->data_rate_bps);
  }
  CHECK(snap.find_link(0, 0) == nullptr);
}

TEST_CASE("single plane of two satellites has one link") {
  WalkerShell shell{1, 2, 550.0, 53.0, 0, 0.0, 0};
  const auto snap = snapshot_at({shell}, 0.0, IslPolicy{}, {1, 0, 0});
  CHECK(snap.links.size() == 1);
}

TEST_CASE("1000 km link has 3.3356 ms delay") {
  std::vector<SatellitePosition> pos = {{SatelliteId{0, 0, 0}, EciPosition{7000.0, 0.0, 0.0, 0.0}},
                                        {SatelliteId{0, 0, 1}, EciPosition{7000.0, 1000.0, 0.0, 0.0}}};
  WalkerShell shell{1, 2, 629.0, 0.0, 0, 0.0, 0};
  const auto snap = build_topology(pos, {shell}, IslPolicy{}, {1, 0, 0});
  REQUIRE(snap.links.size() == 1);
  CHECK(snap.links[0].propagation_delay_s == doctest::Approx(3.3356e-3).epsilon(1e-4));
}

TEST_CASE("cylindrical shadow") {
  const Vec3 sun{1, 0, 0};
  CHECK(sunlit(EciPosition{6921.0, 0, 0, 0}, sun));
  CHECK_FALSE(sunlit(EciPosition{-6921.0, 0, 0, 0}, sun));
  // behind Earth but outside the cylinder
  CHECK(sunlit(EciPosition{-100.0, 6500.0, 0, 0}, sun));
  CHECK_FALSE(sunlit(EciPosition{-100.0, 6300.0, 0, 0}, sun));
}

TEST_CASE("eclipse fraction matches the in-plane shadow arc") {
  const auto shell = desk_shell();
  const double expected = std::asin(6371.0 / 6921.0) / std::numbers::pi;
  const double f = eclipse_fraction(shell, 0, 0, {1, 0, 0});
  CHECK(std::abs(f - expected) < 0.02);
  CHECK(std::abs(f - 0.369) < 0.02);
}

TEST_CASE("eclipse fraction lies in [0, 0.5]") {
  const auto shell = desk_shell();
  for (const Vec3 sun : {Vec3{1, 0, 0}, Vec3{0, 0, 1}, Vec3{0.3, 0.5, 0.8}, Vec3{0, 1, 0}}) {
    for (int p = 0; p < shell.planes; ++p) {
      const double f = eclipse_fraction(shell, p, 0, normalized(sun), 4000);
      CHECK(f >= 0.0);
      CHECK(f <= 0.5);
    }
  }
}

TEST_CASE("ground visibility") {
  const GroundStation station{0.0, 0.0};
  CHECK(ground_visibility(EciPosition{6921.0, 0, 0, 0}, station, 90.0));
  CHECK(elevation_deg(EciPosition{6921.0, 0, 0, 0}, station) == doctest::Approx(90.0));
  CHECK_FALSE(ground_visibility(EciPosition{-6921.0, 0, 0, 0}, station, 0.0));
  CHECK(elevation_deg(EciPosition{-6921.0, 0, 0, 0}, station) < 0.0);
  // 1 degree off zenith as seen from the station
  const double off = 550.0 * std::tan(1.0 * std::numbers::pi / 180.0);
  const EciPosition tilted{6921.0, off, 0, 0};
  CHECK(elevation_deg(tilted, station) == doctest::Approx(89.0).epsilon(1e-3));
  CHECK_FALSE(ground_visibility(tilted, station, 90.0));
  CHECK_THROWS_AS(ground_visibility(tilted, GroundStation{91.0, 0.0}, 10.0), ParameterError);
}

TEST_CASE("cross-shell links join each lower satellite to the nearest upper one") {
  WalkerShell low{3, 4, 550.0, 53.0, 1, 0.0, 0};
  WalkerShell high{2, 3, 1200.0, 70.0, 1, 0.0, 1};
  IslPolicy policy;
  policy.cross_shell = true;
  const auto snap = snapshot_at({low, high}, 100.0, policy, {1, 0, 0});
  std::size_t cross = 0;
  for (const auto& l : snap.links) {
    if (snap.nodes[l.a].shell != snap.nodes[l.b].shell) {
      ++cross;
      CHECK(l.data_rate_bps == policy.cross_shell_rate_bps);
      const std::size_t lower = snap.nodes[l.a].shell == 0 ? l.a : l.b;
      const std::size_t upper = lower == l.a ? l.b : l.a;
      const double d = distance(snap.positions[lower], snap.positions[upper]);
      for (std::size_t j = 0; j < snap.size(); ++j) {
        if (snap.nodes[j].shell == 1) CHECK(distance(snap.positions[lower], snap.positions[j]) >= d - 1e-9);
      }
    }
  }
  CHECK(cross == 12);
  policy.cross_shell = false;
  const auto plain = snapshot_at({low, high}, 100.0, policy, {1, 0, 0});
  for (const auto& l : plain.links) CHECK(plain.nodes[l.a].shell == plain.nodes[l.b].shell);
}

TEST_CASE("satellite ids round-trip") {
  const SatelliteId id{1, 12, 3};
  CHECK(id.str() == "sat-1-12-3");
  CHECK(SatelliteId::parse("sat-1-12-3") == id);
  CHECK_THROWS_AS(SatelliteId::parse("sat-1-2"), ParameterError);
  CHECK_THROWS_AS(SatelliteId::parse("node-1-2-3"), ParameterError);
  CHECK_THROWS_AS(SatelliteId::parse("sat-1-2-3x"), ParameterError);
}

TEST_CASE("shell validation") {
  CHECK_THROWS_AS((WalkerShell{0, 11, 550.0, 53.0, 0, 0.0, 0}).validate(), ParameterError);
  CHECK_THROWS_AS((WalkerShell{6, 0, 550.0, 53.0, 0, 0.0, 0}).validate(), ParameterError);
  CHECK_THROWS_AS((WalkerShell{6, 11, -1.0, 53.0, 0, 0.0, 0}).validate(), ParameterError);
  CHECK_THROWS_AS((WalkerShell{6, 11, 550.0, 181.0, 0, 0.0, 0}).validate(), ParameterError);
  CHECK_THROWS_AS((WalkerShell{6, 11, 550.0, 53.0, 6, 0.0, 0}).validate(), ParameterError);
  CHECK_NOTHROW(desk_shell().validate());
}

TEST_CASE("snapshot export rows") {
  const auto snap = snapshot_at({desk_shell()}, 0.0, IslPolicy{}, {1, 0, 0});
  std::ostringstream os;
  write_snapshot_rows(os, snap);
  std::istringstream in(os.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 66);
  CHECK(os.str().rfind("0,sat-0-0-0,", 0) == 0);
}

}  // TEST_SUITE
