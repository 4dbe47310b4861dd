#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "softseq/seq_space.hpp"

namespace softseq {

enum class RewardKind {
    ExactMatch,   // 1 if the contents agree, else 0
    PrefixMatch,  // number of leading content positions that agree with the reference
    ScaledBleu,   // smoothed sentence BLEU times the candidate content length
    Tabulated,    // arbitrary per-sequence table, independent of the reference
};

std::string_view to_string(RewardKind kind);
RewardKind parse_reward_kind(std::string_view text);

/// Sequence-level pay-off R(y; y*). Every kind depends on y only through its
/// content, which is what makes the partial-sequence extension R(y) = R(y + eos)
/// well defined.
struct RewardSpec {
    using Table = std::map<std::vector<Token>, double>;

    RewardKind kind = RewardKind::ExactMatch;
    int max_order = 4;
    std::shared_ptr<const Table> table;
    double table_default = 0.0;

    static RewardSpec exact_match() { return {}; }
    static RewardSpec prefix_match() {
        RewardSpec s;
        s.kind = RewardKind::PrefixMatch;
        return s;
    }
    static RewardSpec scaled_bleu(int max_order = 4) {
        RewardSpec s;
        s.kind = RewardKind::ScaledBleu;
        s.max_order = max_order;
        return s;
    }
    /// Keys are sequence contents (without eos); missing entries score `fallback`.
    static RewardSpec tabulated(Table values, double fallback = 0.0);
    static RewardSpec zero() { return tabulated({}, 0.0); }
};

/// R(y; ref) for any sequence; an unterminated y is scored as y + eos.
double payoff(const Prefix& y, const Prefix& ref, const RewardSpec& spec);

/// r(prefix, token) = R(prefix + token) - R(prefix).
double incremental_payoff(const SeqSpace& space, const Prefix& prefix, Token token, const Prefix& ref,
                          const RewardSpec& spec);

/// Sentence BLEU over orders 1..max_order with add-one smoothing on every
/// precision and the usual brevity penalty, scaled by the candidate content
/// length. Eos is stripped before counting; an empty candidate scores 0.
double sentence_bleu_scaled(const Prefix& candidate, const Prefix& ref, int max_order = 4);

}  // namespace softseq
