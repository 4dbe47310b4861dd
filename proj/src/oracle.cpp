#include "softseq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "softseq/error.hpp"
#include "softseq/numeric.hpp"

namespace softseq {

namespace {

std::size_t index_of(const std::vector<Token>& tokens, Token t) {
    const auto it = std::lower_bound(tokens.begin(), tokens.end(), t);
    if (it == tokens.end() || *it != t)
        throw Error(ErrorKind::UnknownKey, "token " + std::to_string(t) + " is not allowed here");
    return static_cast<std::size_t>(it - tokens.begin());
}

void require_positive_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorKind::InvalidArgument, "tau must be positive and finite");
}

std::string format_value(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

double TokenDist::prob(Token t) const { return probs[index_of(tokens, t)]; }

double ActionValues::at(Token t) const { return values[index_of(tokens, t)]; }

double SeqDistribution::prob(const Prefix& y) const {
    const auto it = std::find(support.begin(), support.end(), y);
    if (it == support.end()) return 0.0;
    return probs[static_cast<std::size_t>(it - support.begin())];
}

double SeqDistribution::total() const {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
}

double SoftOracle::q_value(const Prefix& prefix, Token token) const {
    const auto it = q.find(prefix);
    if (it == q.end()) throw Error(ErrorKind::UnknownKey, "prefix " + format_token_ids(prefix.tokens) + " not in oracle");
    return it->second.at(token);
}

double SoftOracle::v_value(const Prefix& prefix) const {
    if (prefix.terminated) return 0.0;
    const auto it = v.find(prefix);
    if (it == v.end()) throw Error(ErrorKind::UnknownKey, "prefix " + format_token_ids(prefix.tokens) + " not in oracle");
    return it->second;
}

double PolicyValues::q_value(const Prefix& prefix, Token token) const {
    const auto it = q.find(prefix);
    if (it == q.end()) throw Error(ErrorKind::UnknownKey, "prefix " + format_token_ids(prefix.tokens) + " not evaluated");
    return it->second.at(token);
}

double PolicyValues::v_value(const Prefix& prefix) const {
    if (prefix.terminated) return 0.0;
    const auto it = v.find(prefix);
    if (it == v.end()) throw Error(ErrorKind::UnknownKey, "prefix " + format_token_ids(prefix.tokens) + " not evaluated");
    return it->second;
}

SeqDistribution exact_pr(const SeqSpace& space, const GroundTruthPair& ref, double tau, const RewardSpec& spec) {
    require_positive_tau(tau);
    SeqDistribution out;
    out.support = space.enumerate_complete();
    std::vector<double> rewards;
    rewards.reserve(out.support.size());
    for (const Prefix& y : out.support) rewards.push_back(payoff(y, ref.reference, spec));
    out.probs = softmax(rewards, tau);
    return out;
}

SoftOracle solve_soft_oracle(const SeqSpace& space, const GroundTruthPair& ref, double tau, const RewardSpec& spec) {
    require_positive_tau(tau);
    SoftOracle oracle{space, tau, ref, {}, {}};
    const std::vector<Prefix> prefixes = space.enumerate_prefixes();
    const Token eos = space.vocab().eos();
    for (auto it = prefixes.rbegin(); it != prefixes.rend(); ++it) {
        const Prefix& p = *it;
        ActionValues av{space.allowed_tokens(p), {}};
        av.values.reserve(av.tokens.size());
        for (Token w : av.tokens) {
            const double r = incremental_payoff(space, p, w, ref.reference, spec);
            av.values.push_back(w == eos ? r : r + oracle.v.at(space.transition(p, w)));
        }
        oracle.v[p] = soft_max_value(av.values, tau);
        oracle.q.emplace(p, std::move(av));
    }
    return oracle;
}

TokenDist token_target(const SoftOracle& oracle, const Prefix& prefix) {
    if (prefix.terminated) throw Error(ErrorKind::AlreadyTerminated, "no token target after eos");
    const auto it = oracle.q.find(prefix);
    if (it == oracle.q.end())
        throw Error(ErrorKind::UnknownKey, "prefix " + format_token_ids(prefix.tokens) + " not in oracle");
    return {it->second.tokens, softmax(it->second.values, oracle.tau)};
}

SeqDistribution induced_marginal(const SoftOracle& oracle) {
    std::map<Prefix, TokenDist> targets;
    for (const auto& [p, _] : oracle.q) targets.emplace(p, token_target(oracle, p));
    SeqDistribution out;
    out.support = oracle.space.enumerate_complete();
    out.probs.reserve(out.support.size());
    for (const Prefix& y : out.support) {
        double prob = 1.0;
        Prefix p;
        for (Token t : y.tokens) {
            prob *= targets.at(p).prob(t);
            p = oracle.space.transition(p, t);
        }
        out.probs.push_back(prob);
    }
    return out;
}

SoftOracle oracle_from_marginals(const SeqSpace& space, const GroundTruthPair& ref, double tau,
                                 const RewardSpec& spec) {
    const SeqDistribution pr = exact_pr(space, ref, tau, spec);
    // Mass of every unterminated prefix, plus the mass of each complete sequence.
    std::map<Prefix, double> mass;
    for (std::size_t i = 0; i < pr.support.size(); ++i) {
        const Prefix& y = pr.support[i];
        mass[y] += pr.probs[i];
        Prefix p;
        for (Token t : y.tokens) {
            mass[p] += pr.probs[i];
            if (t == space.vocab().eos()) break;
            p = space.transition(p, t);
        }
    }

    SoftOracle oracle{space, tau, ref, {}, {}};
    const Token eos = space.vocab().eos();
    for (const Prefix& p : space.enumerate_prefixes()) {
        const double here = mass.at(p);
        if (!(here > 0.0))
            throw Error(ErrorKind::ZeroProbabilityPrefix, "prefix " + format_token_ids(p.tokens) + " has zero mass");
        ActionValues av{space.allowed_tokens(p), {}};
        std::vector<double> scaled_log_cond;
        for (Token w : av.tokens) {
            const double next = mass.at(space.transition(p, w));
            if (!(next > 0.0))
                throw Error(ErrorKind::ZeroProbabilityPrefix, "zero conditional mass after " + format_token_ids(p.tokens));
            scaled_log_cond.push_back(tau * std::log(next / here));
        }
        const double v = -scaled_log_cond[index_of(av.tokens, eos)];
        for (double s : scaled_log_cond) av.values.push_back(s + v);
        oracle.v[p] = v;
        oracle.q.emplace(p, std::move(av));
    }
    return oracle;
}

SoftOracle soft_value_iteration(const SeqSpace& space, const GroundTruthPair& ref, double tau, const RewardSpec& spec,
                                int sweeps) {
    require_positive_tau(tau);
    if (sweeps < 0) throw Error(ErrorKind::InvalidArgument, "sweeps must be non-negative");
    const std::vector<Prefix> prefixes = space.enumerate_prefixes();
    const Token eos = space.vocab().eos();

    struct Entry {
        std::vector<double> rewards;
        std::vector<const Prefix*> successors;  // null for eos
    };
    SoftOracle oracle{space, tau, ref, {}, {}};
    std::map<Prefix, Entry> entries;
    for (const Prefix& p : prefixes) {
        ActionValues av{space.allowed_tokens(p), std::vector<double>(space.allowed_tokens(p).size(), 0.0)};
        Entry e;
        for (Token w : av.tokens) e.rewards.push_back(incremental_payoff(space, p, w, ref.reference, spec));
        oracle.q.emplace(p, std::move(av));
        entries.emplace(p, std::move(e));
    }
    for (auto& [p, e] : entries)
        for (Token w : oracle.q.at(p).tokens)
            e.successors.push_back(w == eos ? nullptr : &oracle.q.find(space.transition(p, w))->first);

    for (int sweep = 0; sweep < sweeps; ++sweep) {
        std::map<Prefix, double> v_old;
        for (const auto& [p, av] : oracle.q) v_old[p] = soft_max_value(av.values, tau);
        for (const Prefix& p : prefixes) {
            ActionValues& av = oracle.q.at(p);
            const Entry& e = entries.at(p);
            for (std::size_t i = 0; i < av.values.size(); ++i)
                av.values[i] = e.rewards[i] + (e.successors[i] ? v_old.at(*e.successors[i]) : 0.0);
        }
    }
    for (const auto& [p, av] : oracle.q) oracle.v[p] = soft_max_value(av.values, tau);
    return oracle;
}

PolicyValues policy_evaluation(const SeqSpace& space, const PolicyFn& policy, const GroundTruthPair& ref, double tau,
                               const RewardSpec& spec) {
    if (tau < 0.0) throw Error(ErrorKind::InvalidArgument, "tau must be non-negative");
    PolicyValues out;
    const std::vector<Prefix> prefixes = space.enumerate_prefixes();
    const Token eos = space.vocab().eos();
    for (auto it = prefixes.rbegin(); it != prefixes.rend(); ++it) {
        const Prefix& p = *it;
        const TokenDist pi = policy(p);
        ActionValues av{space.allowed_tokens(p), {}};
        if (pi.tokens != av.tokens)
            throw Error(ErrorKind::InvalidArgument, "policy support differs from the allowed tokens at " +
                                                        format_token_ids(p.tokens));
        double v = tau * entropy(pi.probs);
        for (std::size_t i = 0; i < av.tokens.size(); ++i) {
            const Token w = av.tokens[i];
            const double r = incremental_payoff(space, p, w, ref.reference, spec);
            const double q = w == eos ? r : r + out.v.at(space.transition(p, w));
            av.values.push_back(q);
            v += pi.probs[i] * q;
        }
        out.v[p] = v;
        out.q.emplace(p, std::move(av));
    }
    return out;
}

double max_abs_difference(const SoftOracle& a, const SoftOracle& b) {
    if (a.q.size() != b.q.size() || a.v.size() != b.v.size())
        throw Error(ErrorKind::InvalidArgument, "oracles cover different prefix sets");
    double worst = 0.0;
    for (const auto& [p, av] : a.q) {
        const auto it = b.q.find(p);
        if (it == b.q.end() || it->second.tokens != av.tokens)
            throw Error(ErrorKind::InvalidArgument, "oracles cover different prefix sets");
        for (std::size_t i = 0; i < av.values.size(); ++i)
            worst = std::max(worst, std::abs(av.values[i] - it->second.values[i]));
    }
    for (const auto& [p, v] : a.v) worst = std::max(worst, std::abs(v - b.v.at(p)));
    return worst;
}

void write_oracle_dump(std::ostream& out, const SoftOracle& oracle) {
    out << "# softseq-oracle format_version=" << kOracleDumpVersion << " vocab=" << oracle.space.vocab().size()
        << " eos=" << oracle.space.vocab().eos() << " horizon=" << oracle.space.horizon()
        << " tau=" << format_value(oracle.tau) << " ref=" << format_token_ids(oracle.ref.reference.tokens) << '\n';
    for (const auto& [p, av] : oracle.q)
        for (std::size_t i = 0; i < av.tokens.size(); ++i)
            out << "Q " << format_token_ids(p.tokens) << ' ' << av.tokens[i] << ' ' << format_value(av.values[i]) << '\n';
    for (const auto& [p, v] : oracle.v) out << "V " << format_token_ids(p.tokens) << ' ' << format_value(v) << '\n';
}

}  // namespace softseq
