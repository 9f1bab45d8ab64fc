#pragma once

#include <stdexcept>
#include <string>

namespace spacemoe {

// Base for every error the simulator raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class PlacementError : public Error {
 public:
  using Error::Error;
};

class MemoryInfeasibleError : public Error {
 public:
  using Error::Error;
};

class NoRouteError : public Error {
 public:
  using Error::Error;
};

class ThermalInfeasibleError : public Error {
 public:
  using Error::Error;
};

class ComparisonError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class BrownoutError : public Error {
 public:
  BrownoutError(std::string sat, double t, double deficit_soc)
      : Error("brownout on " + (sat.empty() ? std::string("<unnamed>") : sat) +
              " at t=" + std::to_string(t) + " s (soc short by " +
              std::to_string(deficit_soc) + ")"),
        sat_(std::move(sat)),
        t_(t),
        deficit_soc_(deficit_soc) {}

  const std::string& satellite() const { return sat_; }
  double time() const { return t_; }
  double deficit_soc() const { return deficit_soc_; }

 private:
  std::string sat_;
  double t_;
  double deficit_soc_;
};

}  // namespace spacemoe
