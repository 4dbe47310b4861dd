#include "softseq/reward.hpp"

#include <algorithm>
#include <cmath>

#include "softseq/error.hpp"

namespace softseq {

std::string_view to_string(RewardKind kind) {
    switch (kind) {
        case RewardKind::ExactMatch: return "exact-match";
        case RewardKind::PrefixMatch: return "prefix-match";
        case RewardKind::ScaledBleu: return "scaled-bleu";
        case RewardKind::Tabulated: return "tabulated";
    }
    return "unknown";
}

RewardKind parse_reward_kind(std::string_view text) {
    if (text == "exact-match") return RewardKind::ExactMatch;
    if (text == "prefix-match") return RewardKind::PrefixMatch;
    if (text == "scaled-bleu") return RewardKind::ScaledBleu;
    if (text == "tabulated") return RewardKind::Tabulated;
    throw Error(ErrorKind::ParseError, "unknown reward kind '" + std::string(text) + "'");
}

RewardSpec RewardSpec::tabulated(Table values, double fallback) {
    RewardSpec spec;
    spec.kind = RewardKind::Tabulated;
    spec.table = std::make_shared<const Table>(std::move(values));
    spec.table_default = fallback;
    return spec;
}

namespace {

// Clipped n-gram matches and candidate n-gram count for one order.
std::pair<int, int> ngram_stats(const std::vector<Token>& cand, const std::vector<Token>& ref, std::size_t n) {
    if (cand.size() < n) return {0, 0};
    std::map<std::vector<Token>, int> ref_counts;
    for (std::size_t i = 0; i + n <= ref.size(); ++i) ++ref_counts[{ref.begin() + i, ref.begin() + i + n}];
    std::map<std::vector<Token>, int> cand_counts;
    for (std::size_t i = 0; i + n <= cand.size(); ++i) ++cand_counts[{cand.begin() + i, cand.begin() + i + n}];
    int matches = 0;
    for (const auto& [gram, count] : cand_counts) {
        const auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matches += std::min(count, it->second);
    }
    return {matches, static_cast<int>(cand.size() - n + 1)};
}

}  // namespace

double sentence_bleu_scaled(const Prefix& candidate, const Prefix& ref, int max_order) {
    const std::vector<Token> cand = candidate.content();
    const std::vector<Token> reference = ref.content();
    if (cand.empty() || max_order < 1) return 0.0;

    double log_precision = 0.0;
    for (int n = 1; n <= max_order; ++n) {
        const auto [matches, total] = ngram_stats(cand, reference, static_cast<std::size_t>(n));
        log_precision += std::log((matches + 1.0) / (total + 1.0));
    }
    const double c = static_cast<double>(cand.size());
    const double r = static_cast<double>(reference.size());
    const double log_bp = c < r ? 1.0 - r / c : 0.0;
    return c * std::exp(log_bp + log_precision / max_order);
}

double payoff(const Prefix& y, const Prefix& ref, const RewardSpec& spec) {
    switch (spec.kind) {
        case RewardKind::ExactMatch:
            return y.content() == ref.content() ? 1.0 : 0.0;
        case RewardKind::PrefixMatch: {
            const auto a = y.content();
            const auto b = ref.content();
            const auto n = std::min(a.size(), b.size());
            std::size_t k = 0;
            while (k < n && a[k] == b[k]) ++k;
            return static_cast<double>(k);
        }
        case RewardKind::ScaledBleu:
            return sentence_bleu_scaled(y, ref, spec.max_order);
        case RewardKind::Tabulated: {
            if (!spec.table) return spec.table_default;
            const auto it = spec.table->find(y.content());
            return it == spec.table->end() ? spec.table_default : it->second;
        }
    }
    return 0.0;
}

double incremental_payoff(const SeqSpace& space, const Prefix& prefix, Token token, const Prefix& ref,
                          const RewardSpec& spec) {
    const Prefix next = space.transition(prefix, token);
    return payoff(next, ref, spec) - payoff(prefix, ref, spec);
}

}  // namespace softseq
