#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <vector>

#include "softseq/reward.hpp"
#include "softseq/seq_space.hpp"

namespace softseq {

/// A distribution over the allowed next tokens of some prefix.
/// `tokens` is ascending and aligned with `probs`.
struct TokenDist {
    std::vector<Token> tokens;
    std::vector<double> probs;

    double prob(Token t) const;
};

/// Per-token values at one prefix, aligned with allowed_tokens(prefix).
struct ActionValues {
    std::vector<Token> tokens;
    std::vector<double> values;

    double at(Token t) const;
};

/// A distribution over complete sequences.
struct SeqDistribution {
    std::vector<Prefix> support;
    std::vector<double> probs;

    double prob(const Prefix& y) const;
    double total() const;
};

/// Exact token-level soft oracle for one reference: Q_R, V_R over every
/// reachable unterminated prefix.
struct SoftOracle {
    SeqSpace space;
    double tau = 1.0;
    GroundTruthPair ref;
    std::map<Prefix, ActionValues> q;
    std::map<Prefix, double> v;

    double q_value(const Prefix& prefix, Token token) const;
    double v_value(const Prefix& prefix) const;
};

/// Boltzmann distribution over all of Y with energy -R/tau.
SeqDistribution exact_pr(const SeqSpace& space, const GroundTruthPair& ref, double tau, const RewardSpec& spec);

/// Backward recursion over prefixes in decreasing length:
///   q(p, eos) = r(p, eos) = 0,  q(p, w) = r(p, w) + v(p + w),  v(p) = tau * logsumexp(q(p, .) / tau).
SoftOracle solve_soft_oracle(const SeqSpace& space, const GroundTruthPair& ref, double tau, const RewardSpec& spec);

/// softmax(q(prefix, .) / tau) over the allowed tokens.
TokenDist token_target(const SoftOracle& oracle, const Prefix& prefix);

/// Product of token targets along every y in Y.
SeqDistribution induced_marginal(const SoftOracle& oracle);

/// Second construction of the same oracle from the conditionals of the
/// brute-force sequence distribution, with v pinned by q(p, eos) = 0.
SoftOracle oracle_from_marginals(const SeqSpace& space, const GroundTruthPair& ref, double tau,
                                 const RewardSpec& spec);

/// Fixed-point iteration of the optimal soft Bellman equations from q = 0.
/// Each sweep recomputes every entry from the previous table, so T - 1 sweeps
/// reach the exact solution on the depth-T prefix tree.
SoftOracle soft_value_iteration(const SeqSpace& space, const GroundTruthPair& ref, double tau, const RewardSpec& spec,
                                int sweeps);

/// Token-conditional policy; must return a distribution over allowed_tokens(prefix).
using PolicyFn = std::function<TokenDist(const Prefix&)>;

struct PolicyValues {
    std::map<Prefix, ActionValues> q;
    std::map<Prefix, double> v;

    double q_value(const Prefix& prefix, Token token) const;
    double v_value(const Prefix& prefix) const;
};

/// Exact entropy-regularized evaluation of a fixed policy (gamma = 1):
///   v(p) = sum_w pi(w|p) q(p, w) + tau * H(pi(.|p)),   q(p, w) = r(p, w) + v(p + w),
/// with v of terminated sequences equal to zero.
PolicyValues policy_evaluation(const SeqSpace& space, const PolicyFn& policy, const GroundTruthPair& ref, double tau,
                               const RewardSpec& spec);

/// Largest absolute entrywise difference over q and v; throws if key sets differ.
double max_abs_difference(const SoftOracle& a, const SoftOracle& b);

/// Line-oriented dump: "Q <prefix> <token> <value>" then "V <prefix> <value>",
/// values at 17 significant digits, preceded by a format header.
void write_oracle_dump(std::ostream& out, const SoftOracle& oracle);

inline constexpr int kOracleDumpVersion = 1;

}  // namespace softseq
