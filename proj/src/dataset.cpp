#include "softseq/dataset.hpp"

#include <set>

#include "softseq/error.hpp"
#include "softseq/numeric.hpp"

namespace softseq {

Dataset make_copy_task(int vocab_size, int horizon, int num_examples, Rng& rng, RewardSpec reward) {
    if (vocab_size < 2) throw Error(ErrorKind::InvalidArgument, "copy task needs at least one content token plus eos");
    if (num_examples <= 0) throw Error(ErrorKind::EmptyDataset, "copy task needs at least one example");
    const SeqSpace space(Vocab(vocab_size), horizon);
    space.check_budget();
    const auto content = space.vocab().content_tokens();
    Dataset data{space, std::move(reward), {}, Split::Train};
    for (int i = 0; i < num_examples; ++i) {
        std::vector<Token> tokens;
        for (int t = 0; t + 1 < horizon; ++t) tokens.push_back(content[rng.uniform_index(content.size())]);
        tokens.push_back(space.vocab().eos());
        data.pairs.push_back({i, space.make(std::move(tokens))});
    }
    return data;
}

Dataset validation_split(const Dataset& train) {
    Dataset val = train;
    val.split = Split::Validation;
    return val;
}

void validate_dataset(const Dataset& dataset) {
    if (dataset.pairs.empty()) throw Error(ErrorKind::EmptyDataset, "dataset has no examples");
    std::set<int> ids;
    for (const auto& pair : dataset.pairs) {
        if (!ids.insert(pair.example_id).second)
            throw Error(ErrorKind::InvalidArgument, "duplicate example id " + std::to_string(pair.example_id));
        if (!pair.reference.terminated || dataset.space.make(pair.reference.tokens) != pair.reference)
            throw Error(ErrorKind::InvalidArgument, "reference of example " + std::to_string(pair.example_id) +
                                                        " is not a complete sequence of the space");
    }
}

Prefix greedy_decode(const ParamTable& actor, int example_id) {
    const SeqSpace& space = actor.space();
    Prefix s;
    while (!s.terminated) {
        const auto tokens = space.allowed_tokens(s);
        const auto logits = actor.values(example_id, s);
        std::size_t best = 0;
        for (std::size_t i = 1; i < logits.size(); ++i)
            if (logits[i] > logits[best]) best = i;
        s = space.transition(s, tokens[best]);
    }
    return s;
}

double corpus_eval(const ParamTable& actor, const Dataset& dataset) {
    if (dataset.pairs.empty()) throw Error(ErrorKind::EmptyDataset, "dataset has no examples");
    double total = 0.0;
    for (const auto& pair : dataset.pairs)
        total += payoff(greedy_decode(actor, pair.example_id), pair.reference, dataset.reward);
    return total / static_cast<double>(dataset.pairs.size());
}

namespace {

double expected_reward_from(const ParamTable& actor, const GroundTruthPair& pair, const RewardSpec& reward,
                            const Prefix& s, double prob) {
    const TokenDist pi = policy_dist(actor, pair.example_id, s);
    double total = 0.0;
    for (std::size_t i = 0; i < pi.tokens.size(); ++i) {
        const double p = prob * pi.probs[i];
        if (p == 0.0) continue;
        const Prefix next = actor.space().transition(s, pi.tokens[i]);
        total += next.terminated ? p * payoff(next, pair.reference, reward)
                                 : expected_reward_from(actor, pair, reward, next, p);
    }
    return total;
}

}  // namespace

double expected_reward(const ParamTable& actor, const Dataset& dataset) {
    if (dataset.pairs.empty()) throw Error(ErrorKind::EmptyDataset, "dataset has no examples");
    dataset.space.check_budget();
    double total = 0.0;
    for (const auto& pair : dataset.pairs) total += expected_reward_from(actor, pair, dataset.reward, {}, 1.0);
    return total / static_cast<double>(dataset.pairs.size());
}

double mean_actor_entropy(const ParamTable& actor, const Dataset& dataset) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& pair : dataset.pairs) {
        const Prefix decoded = greedy_decode(actor, pair.example_id);
        Prefix s;
        for (Token t : decoded.tokens) {
            total += entropy(policy_dist(actor, pair.example_id, s).probs);
            ++count;
            s = actor.space().transition(s, t);
        }
    }
    return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace softseq
