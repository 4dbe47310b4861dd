#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "softseq/dataset.hpp"
#include "softseq/reward.hpp"
#include "softseq/trainers.hpp"

namespace softseq {

inline constexpr int kConfigVersion = 1;

struct DatasetConfig {
    int vocab_size = 6;  // including eos
    int horizon = 6;
    int num_examples = 20;
    std::uint64_t seed = 7;
    RewardKind reward = RewardKind::ScaledBleu;

    bool operator==(const DatasetConfig&) const = default;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    TrainerConfig trainer;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Line-oriented `key = value` text. Top-level keys hold the shared trainer
/// hyper-parameters; sections [dataset], [pretrain-actor], [pretrain-critic],
/// [joint], [raml], [vaml-critic] and [vaml-actor] hold the rest. Keys left out
/// keep their defaults. `gamma` may appear but must equal 1.
ExperimentConfig parse_config(std::string_view text);
std::string serialize_config(const ExperimentConfig& config);

ExperimentConfig load_config(const std::string& path);
void save_config(const std::string& path, const ExperimentConfig& config);

Dataset make_dataset(const DatasetConfig& config);

}  // namespace softseq
