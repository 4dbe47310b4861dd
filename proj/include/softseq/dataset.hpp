#pragma once

#include <vector>

#include "softseq/models.hpp"
#include "softseq/reward.hpp"
#include "softseq/rng.hpp"
#include "softseq/seq_space.hpp"

namespace softseq {

enum class Split { Train, Validation };

struct Dataset {
    SeqSpace space;
    RewardSpec reward;
    std::vector<GroundTruthPair> pairs;
    Split split = Split::Train;
};

/// Each reference is a uniformly random content sequence of length T-1
/// followed by eos; example ids are 0..num_examples-1.
Dataset make_copy_task(int vocab_size, int horizon, int num_examples, Rng& rng,
                       RewardSpec reward = RewardSpec::scaled_bleu());

/// Tabular models cannot generalize across example ids, so the validation
/// split re-scores the training references.
Dataset validation_split(const Dataset& train);

/// Throws InvalidArgument/EmptyDataset when references break the space or ids repeat.
void validate_dataset(const Dataset& dataset);

/// Argmax decoding over allowed tokens, ties to the lowest id.
Prefix greedy_decode(const ParamTable& actor, int example_id);

/// Mean pay-off of greedy decodes against the references.
double corpus_eval(const ParamTable& actor, const Dataset& dataset);

/// Mean over examples of E_{y ~ pi}[R(y)], computed by exhaustive enumeration.
double expected_reward(const ParamTable& actor, const Dataset& dataset);

/// Mean policy entropy over the prefixes visited by the greedy decodes.
double mean_actor_entropy(const ParamTable& actor, const Dataset& dataset);

}  // namespace softseq
