#pragma once

#include <cstdint>
#include <string>

#include "civs/config.hpp"

namespace civs {

// Exit codes shared by every subcommand:
//   0  success
//   2  usage or configuration problem (bad flags, bad schema, missing or
//      mismatched inputs)
//   3  reconstruction finished without meeting the convergence criterion
//      (outputs are still written)
//   4  numeric failure (singular system, divergence, non-finite data)
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNotConverged = 3;
inline constexpr int kExitNumeric = 4;

struct CliOverrides {
    bool has_seed = false;
    uint64_t seed = 0;
    bool verbose = false;
};

int cmd_simulate(const RunConfig& cfg, const CliOverrides& ov);
int cmd_reconstruct(const RunConfig& cfg, const CliOverrides& ov);
int cmd_train_dict(const RunConfig& cfg, const CliOverrides& ov);
int cmd_score(const std::string& ref_path, const std::string& est_path,
              const std::string& out_path, double peak);
int cmd_export_png(const std::string& stack_path, const std::string& base);

// Full argv front end (argv[0] is the program name).
int run_cli(int argc, const char* const* argv);

}  // namespace civs
