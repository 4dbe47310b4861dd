#include <doctest.h>

#include <cmath>
#include <set>

#include "softseq/error.hpp"
#include "softseq/oracle.hpp"
#include "softseq/sampling.hpp"
#include "test_support.hpp"

using namespace softseq;
using namespace softseq::test;

TEST_CASE("single-token replacement") {
    const SeqSpace space(Vocab(5), 5);
    const Prefix ref = space.make({A, B, C, 4});
    // position 2 in one-based terms is content index 1
    CHECK(replace_span(ref, 1, {D}).tokens == std::vector<Token>{A, D, C, 4});
    CHECK(replace_span(ref, 1, {B}) == ref);
    CHECK_THROWS_AS(replace_span(ref, 2, {A, A}), Error);
}

TEST_CASE("ngram_replace keeps length and eos") {
    const Vocab vocab(5);
    const SeqSpace space(vocab, 6);
    const Prefix ref = space.make({A, B, C, D, A, 4});
    Rng rng(21);
    ProposalConfig cfg;
    std::set<std::size_t> changed_lengths;
    for (int i = 0; i < 2000; ++i) {
        const Prefix y = ngram_replace(vocab, ref, rng, cfg);
        REQUIRE(y.size() == ref.size());
        CHECK(y.terminated);
        CHECK(y.tokens.back() == 4);
        std::size_t diff = 0;
        for (std::size_t k = 0; k < y.size(); ++k) {
            CHECK((y.tokens[k] != 4 || k + 1 == y.size()));
            diff += y.tokens[k] != ref.tokens[k];
        }
        CHECK(diff <= 4);
        changed_lengths.insert(diff);
        CHECK_NOTHROW(space.make(y.tokens));
    }
    CHECK(changed_lengths.size() == 5);  // 0..4 differences all occur
}

TEST_CASE("one-token references force n = 1") {
    const Vocab vocab(4);
    const SeqSpace space(vocab, 3);
    const Prefix ref = space.make({A, 3});
    Rng rng(2);
    std::set<Token> seen;
    for (int i = 0; i < 300; ++i) {
        const Prefix y = ngram_replace(vocab, ref, rng, {});
        REQUIRE(y.size() == 2);
        CHECK(y.tokens[1] == 3);
        seen.insert(y.tokens[0]);
    }
    CHECK(seen == std::set<Token>{A, B, C});
    CHECK_THROWS_AS(ngram_replace(vocab, space.make({3}), rng, {}), Error);
}

TEST_CASE("proposal batches") {
    const Vocab vocab(4);
    const SeqSpace space(vocab, 4);
    const Prefix ref = space.make({A, B, C, 3});
    Rng rng(1);
    const auto one = draw_proposal_batch(vocab, ref, rng, {4, 1, true});
    REQUIRE(one.size() == 1);
    CHECK(one[0] == ref);
    const auto five = draw_proposal_batch(vocab, ref, rng, {4, 5, true});
    REQUIRE(five.size() == 5);
    CHECK(five.back() == ref);
    CHECK(draw_proposal_batch(vocab, ref, rng, {4, 5, false}).size() == 5);

    Rng r1(99);
    Rng r2(99);
    CHECK(draw_proposal_batch(vocab, ref, r1, {}) == draw_proposal_batch(vocab, ref, r2, {}));
}

TEST_CASE("normalized pay-off weights") {
    const auto space = toy_space();
    const Prefix ref = space.make({A, 2});
    const auto spec = RewardSpec::exact_match();
    auto wb = normalized_payoff_weights({space.make({A, 2}), space.make({B, 2})}, ref, 1.0, spec);
    const double e = std::exp(1.0);
    CHECK(std::abs(wb.weights[0] - e / (e + 1.0)) <= 1e-15);
    CHECK(wb.weights[0] == doctest::Approx(0.73106).epsilon(1e-5));
    CHECK(wb.weights[1] == doctest::Approx(0.26894).epsilon(1e-4));

    wb = normalized_payoff_weights({space.make({B, 2}), space.make({2}), space.make({B, 2})}, ref, 0.5, spec);
    for (double w : wb.weights) CHECK(std::abs(w - 1.0 / 3.0) <= 1e-15);

    wb = normalized_payoff_weights({space.make({B, 2}), space.make({A, 2})}, ref, 1e-6, spec);
    CHECK(wb.weights[1] == 1.0);
    CHECK(wb.weights[0] == 0.0);
}

TEST_CASE("weights over the full space equal P_R") {
    Rng rng(6);
    for (int w : {3, 4})
        for (int t : {3, 4}) {
            const SeqSpace space(Vocab(w), t);
            const auto spec = random_table_reward(w, t, rng);
            const GroundTruthPair ref{0, space.make({0, static_cast<Token>(w - 1)})};
            for (double tau : {0.3, 1.0}) {
                const auto pr = exact_pr(space, ref, tau, spec);
                const auto wb = normalized_payoff_weights(space.enumerate_complete(), ref.reference, tau, spec);
                double sum = 0.0;
                for (std::size_t i = 0; i < wb.samples.size(); ++i) {
                    CHECK(std::abs(wb.weights[i] - pr.prob(wb.samples[i])) <= 1e-10);
                    sum += wb.weights[i];
                }
                CHECK(std::abs(sum - 1.0) <= 1e-12);
            }
        }
}
