#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace softseq {

using Token = std::int32_t;

/// Dense token alphabet 0..size-1 with exactly one end-of-sequence token.
class Vocab {
public:
    /// eos defaults to the last id, so content tokens are 0..size-2.
    explicit Vocab(int size);
    Vocab(int size, Token eos);

    int size() const noexcept { return size_; }
    Token eos() const noexcept { return eos_; }
    bool contains(Token t) const noexcept { return t >= 0 && t < size_; }

    std::vector<Token> all_tokens() const;
    std::vector<Token> content_tokens() const;

    bool operator==(const Vocab&) const = default;

private:
    int size_;
    Token eos_;
};

/// A partial (unterminated) or complete (terminated) sequence.
///
/// Ordering is lexicographic on the token list, which is also the canonical
/// ordering used by every text dump.
struct Prefix {
    std::vector<Token> tokens;
    bool terminated = false;

    std::size_t size() const noexcept { return tokens.size(); }
    bool empty() const noexcept { return tokens.empty(); }

    /// Tokens without the trailing eos.
    std::vector<Token> content() const;

    auto operator<=>(const Prefix&) const = default;
    bool operator==(const Prefix&) const = default;
};

/// "0,3,1" for a token list, "-" for the empty list.
std::string format_token_ids(const std::vector<Token>& tokens);
std::vector<Token> parse_token_ids(std::string_view text);

/// A training example: example_id stands in for the conditioning input x*,
/// reference for the target y* (always terminated).
struct GroundTruthPair {
    int example_id = 0;
    Prefix reference;
};

inline constexpr std::uint64_t kDefaultEnumerationBudget = 1'000'000;

/// The deterministic concatenation MDP over a vocabulary with horizon T.
///
/// T counts tokens including eos. At length T-1 only eos may be emitted, so
/// every complete sequence has length <= T.
class SeqSpace {
public:
    SeqSpace(Vocab vocab, int horizon, std::uint64_t enumeration_budget = kDefaultEnumerationBudget);

    const Vocab& vocab() const noexcept { return vocab_; }
    int horizon() const noexcept { return horizon_; }
    std::uint64_t enumeration_budget() const noexcept { return budget_; }

    Prefix empty_prefix() const { return {}; }

    /// Builds and validates a sequence from raw ids (eos only at the end, length <= T,
    /// and no non-eos token at the enforcement boundary).
    Prefix make(std::vector<Token> tokens) const;

    /// Ascending token ids; {eos} at the enforcement boundary.
    std::vector<Token> allowed_tokens(const Prefix& prefix) const;
    bool is_allowed(const Prefix& prefix, Token token) const;

    Prefix transition(const Prefix& prefix, Token token) const;

    /// All terminated sequences (the set Y), shortlex order.
    std::vector<Prefix> enumerate_complete() const;
    /// All reachable unterminated prefixes (the set Y-), shortlex order.
    std::vector<Prefix> enumerate_prefixes() const;

    /// Throws EnumerationBudgetExceeded when |W|^T exceeds the budget.
    void check_budget() const;

    bool operator==(const SeqSpace&) const = default;

private:
    Vocab vocab_;
    int horizon_;
    std::uint64_t budget_;
};

}  // namespace softseq
