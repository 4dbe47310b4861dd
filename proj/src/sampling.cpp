#include "softseq/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "softseq/error.hpp"
#include "softseq/numeric.hpp"

namespace softseq {

namespace {

void validate(const Prefix& ref, const ProposalConfig& config) {
    if (!ref.terminated) throw Error(ErrorKind::InvalidArgument, "reference must be terminated");
    if (config.max_ngram < 1 || config.num_samples < 1)
        throw Error(ErrorKind::InvalidArgument, "proposal needs max_ngram >= 1 and num_samples >= 1");
}

}  // namespace

Prefix replace_span(const Prefix& ref, std::size_t start, const std::vector<Token>& replacement) {
    const std::size_t content = ref.terminated ? ref.size() - 1 : ref.size();
    if (start + replacement.size() > content)
        throw Error(ErrorKind::InvalidArgument, "replacement span runs past the content");
    Prefix out = ref;
    std::copy(replacement.begin(), replacement.end(), out.tokens.begin() + static_cast<std::ptrdiff_t>(start));
    return out;
}

Prefix ngram_replace(const Vocab& vocab, const Prefix& ref, Rng& rng, const ProposalConfig& config) {
    validate(ref, config);
    const std::size_t length = ref.size() - 1;
    if (length == 0) throw Error(ErrorKind::EmptyReference, "reference has no content to replace");
    const std::vector<Token> content = vocab.content_tokens();
    if (content.empty()) throw Error(ErrorKind::InvalidArgument, "vocabulary has no content tokens");

    const std::size_t max_n = std::min(static_cast<std::size_t>(config.max_ngram), length);
    const std::size_t n = 1 + rng.uniform_index(max_n);
    const std::size_t start = rng.uniform_index(length - n + 1);
    std::vector<Token> replacement(n);
    for (Token& t : replacement) t = content[rng.uniform_index(content.size())];
    return replace_span(ref, start, replacement);
}

std::vector<Prefix> draw_proposal_batch(const Vocab& vocab, const Prefix& ref, Rng& rng,
                                        const ProposalConfig& config) {
    validate(ref, config);
    const int draws = config.include_reference ? config.num_samples - 1 : config.num_samples;
    std::vector<Prefix> batch;
    batch.reserve(static_cast<std::size_t>(config.num_samples));
    for (int i = 0; i < draws; ++i) batch.push_back(ngram_replace(vocab, ref, rng, config));
    if (config.include_reference) batch.push_back(ref);
    return batch;
}

WeightedBatch normalized_payoff_weights(std::vector<Prefix> samples, const Prefix& ref, double tau,
                                        const RewardSpec& spec) {
    if (samples.empty()) throw Error(ErrorKind::InvalidArgument, "empty sample batch");
    if (!(tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "tau must be positive");
    std::vector<double> rewards;
    rewards.reserve(samples.size());
    for (const Prefix& y : samples) rewards.push_back(payoff(y, ref, spec));
    return {std::move(samples), softmax(rewards, tau)};
}

}  // namespace softseq
