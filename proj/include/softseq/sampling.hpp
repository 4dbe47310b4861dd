#pragma once

#include <vector>

#include "softseq/reward.hpp"
#include "softseq/rng.hpp"
#include "softseq/seq_space.hpp"

namespace softseq {

struct ProposalConfig {
    int max_ngram = 4;
    int num_samples = 5;  // M, including the reference when include_reference is set
    bool include_reference = true;
};

/// Samples paired with self-normalized importance weights.
struct WeightedBatch {
    std::vector<Prefix> samples;
    std::vector<double> weights;
};

/// Replaces content positions [start, start + replacement.size()) of `ref`.
Prefix replace_span(const Prefix& ref, std::size_t start, const std::vector<Token>& replacement);

/// One draw from the n-gram replacement proposal: n ~ U{1..min(max_ngram, L)},
/// start ~ U{0..L-n}, replacement tokens ~ U(W \ {eos}). Identity replacements
/// are possible. Length and eos position are preserved.
Prefix ngram_replace(const Vocab& vocab, const Prefix& ref, Rng& rng, const ProposalConfig& config);

/// M-1 proposal draws followed by the reference (or M draws when the reference
/// is excluded).
std::vector<Prefix> draw_proposal_batch(const Vocab& vocab, const Prefix& ref, Rng& rng,
                                        const ProposalConfig& config);

/// weight_i = exp(R_i / tau) / sum_j exp(R_j / tau). The n-gram proposal is
/// uniform over its draws, so its density cancels from the ratio.
WeightedBatch normalized_payoff_weights(std::vector<Prefix> samples, const Prefix& ref, double tau,
                                        const RewardSpec& spec);

}  // namespace softseq
