#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "softseq/dataset.hpp"
#include "softseq/models.hpp"
#include "softseq/trainers.hpp"

namespace softseq {

enum class Algorithm { Mle, Raml, SoftQ, Vaml, Ac, Erac };

std::string_view to_string(Algorithm alg);
Algorithm parse_algorithm(std::string_view text);

inline constexpr int kRunLogVersion = 1;

/// One metrics record per epoch. Optional fields are written as null, which is
/// how a diverged epoch avoids emitting non-finite numbers.
struct EpochRecord {
    int epoch = 0;
    std::string alg;
    std::string phase;
    std::map<std::string, double> losses;
    std::optional<double> reward_train;
    std::optional<double> reward_val;
    std::optional<double> actor_entropy;
    double step_size = 0.0;
    bool diverged = false;
};

/// Append-only JSONL log: a header object echoing the configuration and seed,
/// then one object per epoch.
struct RunLog {
    std::string alg;
    std::uint64_t seed = 0;
    std::string config_echo;  // JSON text
    std::vector<EpochRecord> records;

    std::string to_jsonl() const;
};

struct TrainResult {
    ParamTable actor;
    std::optional<ParamTable> critic;
    RunLog log;
    bool diverged = false;
    std::string divergence_reason;
};

/// Runs one algorithm end to end:
///   mle    pretrain-actor phase
///   raml   weighted n-gram proposal batches
///   softq  VAML phase 1 only (critic by soft Q-learning)
///   vaml   soft Q-learning critic, then token-target actor training
///   ac/erac  actor MLE pretraining, critic pretraining with the actor fixed,
///            then joint training (one critic and one actor update per trajectory)
/// Divergence (a non-finite loss or gradient) stops the run and is reported in
/// the result and the final log record rather than thrown.
TrainResult train(Algorithm alg, const Dataset& train_set, const Dataset& val_set, const TrainerConfig& config);

std::string config_echo_json(const TrainerConfig& config);

}  // namespace softseq
