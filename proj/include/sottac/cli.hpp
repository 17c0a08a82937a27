#pragma once

#include <cstdint>
#include <iosfwd>
#include <json.hpp>
#include <string>
#include <vector>

#include "sottac/trainer.hpp"

namespace sottac::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr const char* kCsvHeader = "episode,return,critic_loss,grad_norm,screening,wall_ns";
inline const std::vector<std::uint64_t> kDefaultSeeds = {42, 100, 2026, 777, 1234};

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;

/// Full effective configuration (seed excluded) with stable key order.
Json config_to_json(const TrainConfig& config);
/// Overrides fields of `base` with the keys present in `j`. Unknown keys and
/// ill-typed values throw ContractViolation.
TrainConfig config_from_json(const Json& j, TrainConfig base);

/// One row per episode; batch-level columns repeat on every episode row of
/// the batch, zero before the first actor update.
std::string returns_csv(const RunResult& result);

/// Mean update cost over episode rows with an actor update (0 if none).
double mean_step_ns(const RunResult& result);

/// `sottac run|bench|check ...`; returns the exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace sottac::cli
