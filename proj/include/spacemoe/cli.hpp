#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace spacemoe {

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;      // malformed or invalid config
inline constexpr int kExitInfeasible = 2;  // engine refused the scenario
inline constexpr int kExitCompare = 3;     // comparison guard tripped
inline constexpr int kExitUsage = 64;

struct CliCommon {
  std::vector<std::string> overrides;  // "a.b=value"
  std::string out_dir = "out";
  std::set<std::string> emit;          // metrics is always written
  bool verbose = false;
};

// Names accepted by --emit.
const std::vector<std::string>& emit_choices();

int cmd_run(const std::string& config, const CliCommon& common, std::ostream& out, std::ostream& err);
int cmd_compare(const std::vector<std::string>& configs, const CliCommon& common, std::ostream& out,
                std::ostream& err);
int cmd_sweep(const std::string& config, const std::string& param, const std::vector<std::string>& values,
              const CliCommon& common, std::ostream& out, std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace spacemoe
