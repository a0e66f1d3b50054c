#pragma once

#include <string>

#include "rspt/learning.hpp"

namespace rspt {

/// Versioned binary checkpoints: magic, kind, seed, an integer header that
/// pins the architecture, then the flat parameter array. Loading against an
/// expected configuration refuses on any header mismatch and reports the
/// differing fields.
enum class CheckpointKind : uint32_t { predictor = 1, policy = 2, target_policy = 3 };

void save_predictor(const std::string& path, const PredictorParams& params);
void save_policy(const std::string& path, const PolicyParams& params);
void save_target_policy(const std::string& path, const TargetPolicyParams& params);

PredictorParams load_predictor(const std::string& path);
PolicyParams load_policy(const std::string& path);
TargetPolicyParams load_target_policy(const std::string& path);

/// Load and require an exact architecture match.
PredictorParams load_predictor(const std::string& path, const PredictorConfig& expected);
PolicyParams load_policy(const std::string& path, const PolicyConfig& expected);

struct CheckpointInfo {
    CheckpointKind kind;
    uint64_t seed = 0;
    std::vector<int64_t> header;
    size_t param_count = 0;
    Scalar param_min = 0, param_max = 0, param_norm = 0;
};

CheckpointInfo inspect_checkpoint(const std::string& path);
std::string describe(const CheckpointInfo& info);

}  // namespace rspt
