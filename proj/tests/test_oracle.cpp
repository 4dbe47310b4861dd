#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "softseq/error.hpp"
#include "softseq/numeric.hpp"
#include "softseq/oracle.hpp"
#include "test_support.hpp"

using namespace softseq;
using namespace softseq::test;

namespace {

constexpr double kE = 2.718281828459045;

// P_R over Y computed directly from the reward table, independent of exact_pr.
std::map<std::vector<Token>, double> brute_pr(int vocab_size, int horizon, const Prefix& ref, double tau,
                                              const RewardSpec& spec) {
    std::map<std::vector<Token>, double> w;
    double z = 0.0;
    for (const auto& y : brute_force_complete(vocab_size, horizon)) {
        Prefix py{y, true};
        const double x = std::exp(payoff(py, ref, spec) / tau);
        w[y] = x;
        z += x;
    }
    for (auto& [_, x] : w) x /= z;
    return w;
}

}  // namespace

TEST_CASE("exact P_R on the toy instance") {
    const auto dist = exact_pr(toy_space(), toy_ref(), 1.0, RewardSpec::exact_match());
    REQUIRE(dist.support.size() == 3);
    CHECK(std::abs(dist.prob(toy_space().make({2})) - 1.0 / (2.0 + kE)) <= 1e-15);
    CHECK(std::abs(dist.prob(toy_space().make({A, 2})) - kE / (2.0 + kE)) <= 1e-15);
    CHECK(dist.prob(toy_space().make({B, 2})) == doctest::Approx(0.21194).epsilon(1e-4));
    CHECK(dist.prob(toy_space().make({A, 2})) == doctest::Approx(0.57611).epsilon(1e-4));
    CHECK(std::abs(dist.total() - 1.0) <= 1e-12);
}

TEST_CASE("exact P_R limits") {
    const SeqSpace space(Vocab(3), 3);
    const GroundTruthPair ref{0, space.make({A, B, 2})};
    const auto hot = exact_pr(space, ref, 1e6, RewardSpec::scaled_bleu());
    const double uniform = 1.0 / static_cast<double>(hot.support.size());
    for (double p : hot.probs) CHECK(std::abs(p - uniform) <= 1e-5);
    const auto flat = exact_pr(space, ref, 0.7, RewardSpec::zero());
    for (double p : flat.probs) CHECK(p == uniform);
    CHECK_THROWS_AS(exact_pr(space, ref, 0.0, RewardSpec::zero()), Error);
}

TEST_CASE("soft oracle backward recursion on the toy instance") {
    const auto o = solve_soft_oracle(toy_space(), toy_ref(), 1.0, RewardSpec::exact_match());
    const Prefix empty;
    CHECK(o.q_value(empty, A) == 1.0);
    CHECK(o.q_value(empty, B) == 0.0);
    CHECK(o.q_value(empty, 2) == 0.0);
    CHECK(o.v_value(toy_space().make({A})) == 0.0);
    CHECK(o.v_value(toy_space().make({B})) == 0.0);
    CHECK(std::abs(o.v_value(empty) - std::log(2.0 + kE)) <= 1e-15);
    CHECK(o.v_value(empty) == doctest::Approx(1.55145).epsilon(1e-5));
}

TEST_CASE("zero reward: V counts completions and P_R is uniform") {
    // q(y, w) = v(y + w) and v(y) = tau * log(number of complete continuations of y).
    const SeqSpace space(Vocab(4), 4);
    const GroundTruthPair ref{0, space.make({A, B, C, 3})};
    for (double tau : {0.3, 2.0}) {
        const auto o = solve_soft_oracle(space, ref, tau, RewardSpec::zero());
        for (const auto& [p, av] : o.q) {
            const int remaining = space.horizon() - static_cast<int>(p.size());
            double completions = 0.0;
            for (int l = 0; l < remaining; ++l) completions += std::pow(3.0, l);
            CHECK(std::abs(o.v.at(p) - tau * std::log(completions)) <= 1e-12);
            CHECK(av.at(3) == 0.0);
        }
        const auto m = induced_marginal(o);
        for (double pr : m.probs) CHECK(std::abs(pr - 1.0 / static_cast<double>(m.support.size())) <= 1e-12);
    }
}

TEST_CASE("enforcement boundary has V = Q(eos) = 0 and a point-mass target") {
    const SeqSpace space(Vocab(3), 3);
    const GroundTruthPair ref{0, space.make({B, A, 2})};
    const auto o = solve_soft_oracle(space, ref, 0.5, RewardSpec::scaled_bleu());
    for (const auto& [p, av] : o.q) {
        if (static_cast<int>(p.size()) != space.horizon() - 1) continue;
        CHECK(av.values.size() == 1);
        CHECK(o.v.at(p) == 0.0);
        CHECK(av.values[0] == 0.0);
        CHECK(token_target(o, p).probs == std::vector<double>{1.0});
    }
}

TEST_CASE("token target on the toy instance") {
    const auto o = solve_soft_oracle(toy_space(), toy_ref(), 1.0, RewardSpec::exact_match());
    const auto t = token_target(o, {});
    CHECK(t.tokens == std::vector<Token>{A, B, 2});
    CHECK(std::abs(t.prob(A) - kE / (2.0 + kE)) <= 1e-15);
    CHECK(std::abs(t.prob(2) - 1.0 / (2.0 + kE)) <= 1e-15);
    // entrywise exp((q - v) / tau)
    for (Token w : t.tokens) CHECK(std::abs(t.prob(w) - std::exp(o.q_value({}, w) - o.v_value({}))) <= 1e-15);
    CHECK_THROWS_AS(token_target(o, toy_space().make({A, 2})), Error);
}

TEST_CASE("induced marginal reproduces P_R") {
    SUBCASE("toy") {
        const auto o = solve_soft_oracle(toy_space(), toy_ref(), 1.0, RewardSpec::exact_match());
        const auto m = induced_marginal(o);
        const auto pr = exact_pr(toy_space(), toy_ref(), 1.0, RewardSpec::exact_match());
        for (std::size_t i = 0; i < m.support.size(); ++i) CHECK(std::abs(m.probs[i] - pr.probs[i]) <= 1e-12);
    }
    SUBCASE("single-sequence space") {
        const SeqSpace space(Vocab(1), 1);
        const GroundTruthPair ref{0, space.make({0})};
        const auto m = induced_marginal(solve_soft_oracle(space, ref, 1.0, RewardSpec::exact_match()));
        CHECK(m.probs == std::vector<double>{1.0});
    }
    SUBCASE("randomized instances against a brute-force P_R") {
        Rng rng(11);
        for (int w : {3, 4})
            for (int t : {3, 4, 5})
                for (double tau : {0.3, 1.0, 3.0}) {
                    const SeqSpace space(Vocab(w), t);
                    const auto spec = random_table_reward(w, t, rng);
                    const GroundTruthPair ref{0, space.make({0, static_cast<Token>(w - 1)})};
                    const auto m = induced_marginal(solve_soft_oracle(space, ref, tau, spec));
                    const auto truth = brute_pr(w, t, ref.reference, tau, spec);
                    for (std::size_t i = 0; i < m.support.size(); ++i)
                        CHECK(std::abs(m.probs[i] - truth.at(m.support[i].tokens)) <= 1e-9);
                }
    }
}

TEST_CASE("oracle from marginals agrees with the backward recursion") {
    SUBCASE("toy") {
        const auto a = solve_soft_oracle(toy_space(), toy_ref(), 1.0, RewardSpec::exact_match());
        const auto b = oracle_from_marginals(toy_space(), toy_ref(), 1.0, RewardSpec::exact_match());
        CHECK(max_abs_difference(a, b) <= 1e-9);
    }
    SUBCASE("W={a,eos}, T=3, tau=0.5") {
        const SeqSpace space(Vocab(2), 3);
        const GroundTruthPair ref{0, space.make({0, 1})};
        const auto a = solve_soft_oracle(space, ref, 0.5, RewardSpec::exact_match());
        const auto b = oracle_from_marginals(space, ref, 0.5, RewardSpec::exact_match());
        CHECK(max_abs_difference(a, b) <= 1e-9);
        for (const auto& [p, av] : b.q) CHECK(av.at(1) == 0.0);
    }
    SUBCASE("zero reward") {
        const SeqSpace space(Vocab(3), 3);
        const GroundTruthPair ref{0, space.make({2})};
        const auto a = solve_soft_oracle(space, ref, 1.0, RewardSpec::zero());
        const auto b = oracle_from_marginals(space, ref, 1.0, RewardSpec::zero());
        CHECK(max_abs_difference(a, b) <= 1e-9);
        for (const auto& [p, av] : b.q) CHECK(std::abs(av.at(2)) <= 1e-12);
    }
}

TEST_CASE("soft value iteration converges in T sweeps") {
    const auto exact = solve_soft_oracle(toy_space(), toy_ref(), 1.0, RewardSpec::exact_match());
    const auto vi = soft_value_iteration(toy_space(), toy_ref(), 1.0, RewardSpec::exact_match(), 2);
    CHECK(max_abs_difference(exact, vi) <= 1e-12);

    const auto none = soft_value_iteration(toy_space(), toy_ref(), 1.0, RewardSpec::exact_match(), 0);
    for (const auto& [p, av] : none.q)
        for (double q : av.values) CHECK(q == 0.0);

    const SeqSpace space(Vocab(3), 4);
    const GroundTruthPair ref{0, space.make({A, B, 2})};
    const auto zero = soft_value_iteration(space, ref, 0.4, RewardSpec::zero(), 4);
    CHECK(max_abs_difference(zero, solve_soft_oracle(space, ref, 0.4, RewardSpec::zero())) <= 1e-12);

    // Values at depth d are exact after T-1-d sweeps, so T-2 sweeps leave the root inexact.
    const auto short_vi = soft_value_iteration(space, ref, 0.4, RewardSpec::scaled_bleu(), 2);
    const auto full_vi = soft_value_iteration(space, ref, 0.4, RewardSpec::scaled_bleu(), 4);
    const auto solved = solve_soft_oracle(space, ref, 0.4, RewardSpec::scaled_bleu());
    CHECK(max_abs_difference(full_vi, solved) <= 1e-12);
    CHECK(max_abs_difference(short_vi, solved) > 1e-6);
}

TEST_CASE("shift invariance of the token target and log-partition identity") {
    const SeqSpace space(Vocab(4), 4);
    Rng rng(5);
    const auto spec = random_table_reward(4, 4, rng);
    const GroundTruthPair ref{0, space.make({A, 3})};
    const double tau = 0.3;
    auto o = solve_soft_oracle(space, ref, tau, spec);
    const auto before = token_target(o, space.make({B}));
    for (double& q : o.q.at(space.make({B})).values) q += 17.25;
    const auto after = token_target(o, space.make({B}));
    for (std::size_t i = 0; i < before.probs.size(); ++i) CHECK(std::abs(before.probs[i] - after.probs[i]) <= 1e-12);

    // Incremental rewards telescope from R(empty), so the identity holds for R - R(empty).
    const double base = payoff({}, ref.reference, spec);
    std::vector<double> scaled;
    for (const auto& y : brute_force_complete(4, 4))
        scaled.push_back((payoff({y, true}, ref.reference, spec) - base) / tau);
    CHECK(std::abs(o.v_value({}) - tau * logsumexp(scaled)) <= 1e-9);
}

TEST_CASE("policy evaluation") {
    const auto space = toy_space();
    const auto spec = RewardSpec::exact_match();
    const PolicyFn uniform = [&](const Prefix& p) {
        const auto tokens = space.allowed_tokens(p);
        return TokenDist{tokens, std::vector<double>(tokens.size(), 1.0 / static_cast<double>(tokens.size()))};
    };
    const auto pe = policy_evaluation(space, uniform, toy_ref(), 1.0, spec);
    CHECK(pe.q_value({}, A) == 1.0);
    CHECK(pe.q_value({}, B) == 0.0);
    CHECK(pe.q_value({}, 2) == 0.0);
    CHECK(std::abs(pe.v_value({}) - (1.0 / 3.0 + std::log(3.0))) <= 1e-15);
    CHECK(pe.v_value({}) == doctest::Approx(1.43195).epsilon(1e-5));

    SUBCASE("greedy policy has no entropy bonus") {
        const PolicyFn greedy = [&](const Prefix& p) {
            auto tokens = space.allowed_tokens(p);
            std::vector<double> probs(tokens.size(), 0.0);
            probs[0] = 1.0;
            return TokenDist{tokens, probs};
        };
        const auto g = policy_evaluation(space, greedy, toy_ref(), 1.0, spec);
        CHECK(g.v_value({}) == 1.0);  // always picks a, then eos: return R(a eos) - R() = 1
    }

    SUBCASE("the oracle's token target is a fixed point") {
        const SeqSpace s(Vocab(4), 4);
        Rng rng(8);
        const auto table = random_table_reward(4, 4, rng);
        const GroundTruthPair r{0, s.make({B, 3})};
        const auto o = solve_soft_oracle(s, r, 0.7, table);
        const auto pe2 = policy_evaluation(s, [&](const Prefix& p) { return token_target(o, p); }, r, 0.7, table);
        for (const auto& [p, av] : o.q) {
            CHECK(std::abs(pe2.v.at(p) - o.v.at(p)) <= 1e-9);
            for (std::size_t i = 0; i < av.values.size(); ++i)
                CHECK(std::abs(pe2.q.at(p).values[i] - av.values[i]) <= 1e-9);
        }
    }
}

TEST_CASE("oracle dump is deterministic and well formed") {
    const auto o = solve_soft_oracle(toy_space(), toy_ref(), 1.0, RewardSpec::exact_match());
    std::ostringstream a;
    std::ostringstream b;
    write_oracle_dump(a, o);
    write_oracle_dump(b, solve_soft_oracle(toy_space(), toy_ref(), 1.0, RewardSpec::exact_match()));
    CHECK(a.str() == b.str());

    std::istringstream in(a.str());
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# softseq-oracle format_version=1", 0) == 0);
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    // 3 + 1 + 1 Q records, then 3 V records
    REQUIRE(lines.size() == 8);
    CHECK(lines[0] == "Q - 0 1");
    CHECK(lines[2] == "Q - 2 0");
    CHECK(lines[3] == "Q 0 2 0");
    CHECK(lines[5].rfind("V - ", 0) == 0);
    CHECK(std::is_sorted(lines.begin(), lines.begin() + 5));
    // values parse back to the same doubles
    CHECK(std::strtod(lines[5].c_str() + 4, nullptr) == o.v_value({}));
}
