#include <doctest.h>

#include <cmath>

#include "softseq/error.hpp"
#include "softseq/oracle.hpp"
#include "softseq/trainers.hpp"
#include "test_support.hpp"

using namespace softseq;
using namespace softseq::test;

namespace {

const Token kEos = 2;  // toy eos

double grad_at(const GradAccumulator& g, int example, const Prefix& prefix, std::size_t index) {
    const auto it = g.rows().find(RowKey{example, prefix});
    return it == g.rows().end() ? 0.0 : it->second.at(index);
}

bool same_grads(const GradAccumulator& a, const GradAccumulator& b, double tol) {
    for (const auto& [key, row] : a.rows())
        for (std::size_t i = 0; i < row.size(); ++i)
            if (std::abs(row[i] - grad_at(b, key.example, key.prefix, i)) > tol) return false;
    for (const auto& [key, row] : b.rows())
        for (std::size_t i = 0; i < row.size(); ++i)
            if (std::abs(row[i] - grad_at(a, key.example, key.prefix, i)) > tol) return false;
    return true;
}

}  // namespace

TEST_CASE("MLE loss on the toy instance") {
    const auto space = toy_space();
    ParamTable actor(space, TableKind::PolicyLogits);
    auto r = mle_loss(actor, toy_ref());
    CHECK(std::abs(r.loss - std::log(3.0)) <= 1e-15);
    CHECK(std::abs(grad_at(r.grads, 0, {}, A) - (-2.0 / 3.0)) <= 1e-15);
    CHECK(std::abs(grad_at(r.grads, 0, {}, B) - 1.0 / 3.0) <= 1e-15);

    actor.set(0, {}, A, 50.0);
    r = mle_loss(actor, toy_ref());
    CHECK(r.loss >= 0.0);
    CHECK(r.loss <= 1e-20);
}

TEST_CASE("RAML with only the reference equals MLE") {
    const SeqSpace space(Vocab(4), 4);
    const GroundTruthPair pair{0, space.make({A, B, C, 3})};
    ParamTable actor(space, TableKind::PolicyLogits);
    Rng rng(5);
    randomize(actor, 0, rng);
    const WeightedBatch batch{{pair.reference}, {1.0}};
    const auto raml = raml_loss(actor, pair, batch);
    const auto mle = mle_loss(actor, pair);
    CHECK(std::abs(raml.loss - mle.loss) <= 1e-14);
    CHECK(same_grads(raml.grads, mle.grads, 1e-14));
}

TEST_CASE("RAML loss is the weighted sum of sequence log-likelihoods") {
    const SeqSpace space(Vocab(4), 4);
    const GroundTruthPair pair{0, space.make({A, B, C, 3})};
    ParamTable actor(space, TableKind::PolicyLogits);
    Rng rng(8);
    randomize(actor, 0, rng);
    const WeightedBatch batch{{pair.reference, space.make({A, A, C, 3}), space.make({B, 3})}, {0.5, 0.3, 0.2}};
    double expected = 0.0;
    for (std::size_t i = 0; i < 3; ++i) expected -= batch.weights[i] * brute_log_prob(actor, 0, batch.samples[i].tokens);
    CHECK(std::abs(raml_loss(actor, pair, batch).loss - expected) <= 1e-12);
}

TEST_CASE("soft Q-learning loss vanishes at the oracle") {
    const SeqSpace space(Vocab(4), 4);
    const GroundTruthPair pair{0, space.make({A, B, C, 3})};
    for (double tau : {0.1, 1.0}) {
        const RewardSpec spec = RewardSpec::scaled_bleu();
        const SoftOracle oracle = solve_soft_oracle(space, pair, tau, spec);
        ParamTable critic(space, TableKind::QValues);
        load_values(critic, 0, oracle.q);
        const StepRewards rewards(space, spec);
        for (const Prefix& y : space.enumerate_complete()) {
            const auto r = softq_loss(critic, pair, y, tau, rewards);
            CHECK(r.loss <= 1e-20);
            CHECK(r.grads.norm() <= 1e-9);
        }
    }
}

TEST_CASE("soft Q-learning loss by hand on the toy instance") {
    const auto space = toy_space();
    ParamTable critic(space, TableKind::QValues);
    critic.set(0, {}, A, 0.3);
    critic.set(0, space.make({A}), kEos, 0.2);
    const StepRewards rewards(space, RewardSpec::exact_match());
    // step 0: 0.3 - 1 - logsumexp(0.2) = -0.9; step 1: 0.2 - 0
    const auto r = softq_loss(critic, toy_ref(), space.make({A, kEos}), 1.0, rewards);
    CHECK(std::abs(r.loss - (0.81 + 0.04)) <= 1e-14);
    CHECK(std::abs(grad_at(r.grads, 0, {}, A) - (-1.8)) <= 1e-14);
    // bootstrap gradient: -2 * (-0.9) from step 0 plus 2 * 0.2 from step 1
    CHECK(std::abs(grad_at(r.grads, 0, space.make({A}), 0) - (1.8 + 0.4)) <= 1e-14);
}

TEST_CASE("temporal-difference critic loss by hand at tau = 0") {
    const auto space = toy_space();
    CriticPair critics(space);
    critics.online.set(0, {}, A, 0.3);
    critics.online.set(0, space.make({A}), kEos, 0.2);
    critics.target.set(0, space.make({A}), kEos, 0.5);
    const ParamTable actor(space, TableKind::PolicyLogits);
    const StepRewards rewards(space, RewardSpec::exact_match());
    const Prefix y = space.make({A, kEos});

    const auto erac = erac_critic_loss(critics, actor, toy_ref(), y, 0.0, 0.0, rewards);
    const auto ac = ac_critic_loss(critics, actor, toy_ref(), y, 0.0, rewards);
    CHECK(std::abs(erac.loss - 1.48) <= 1e-14);
    CHECK(ac.loss == erac.loss);
    CHECK(std::abs(grad_at(erac.grads, 0, {}, A) - (-2.4)) <= 1e-14);
    CHECK(std::abs(grad_at(erac.grads, 0, space.make({A}), 0) - 0.4) <= 1e-14);

    // smoothing: row "" is {0.3, 0, 0} with mean 0.1, row "a" has one entry
    const auto smoothed = erac_critic_loss(critics, actor, toy_ref(), y, 0.0, 1.0, rewards);
    CHECK(std::abs(smoothed.loss - 1.54) <= 1e-14);
}

TEST_CASE("entropy bonus enters the critic target") {
    const auto space = toy_space();
    CriticPair critics(space);
    const ParamTable actor(space, TableKind::PolicyLogits);
    const StepRewards rewards(space, RewardSpec::exact_match());
    const Prefix y = space.make({B, kEos});
    // r = 0 everywhere, H(pi(.|b)) = 0 since only eos is allowed, so every residual is zero
    CHECK(erac_critic_loss(critics, actor, toy_ref(), y, 1.0, 0.0, rewards).loss == 0.0);
    // the one-token trajectory "eos" ends at once: residual is Q("", eos) - 0
    critics.online.set(0, {}, kEos, 0.7);
    const auto r = erac_critic_loss(critics, actor, toy_ref(), space.make({kEos}), 1.0, 0.0, rewards);
    CHECK(std::abs(r.loss - 0.49) <= 1e-15);
}

TEST_CASE("entropy-regularized losses reduce to plain actor-critic at tau = 0") {
    const SeqSpace space(Vocab(4), 4);
    const GroundTruthPair pair{0, space.make({A, B, C, 3})};
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        CriticPair critics(space);
        ParamTable actor(space, TableKind::PolicyLogits);
        randomize(critics.online, 0, rng);
        randomize(critics.target, 0, rng);
        randomize(actor, 0, rng, -2.0, 2.0);
        const StepRewards rewards(space, RewardSpec::scaled_bleu());
        const Prefix y = sample_trajectory(actor, 0, rng);
        const auto ec = erac_critic_loss(critics, actor, pair, y, 0.0, 0.001, rewards);
        const auto ac = ac_critic_loss(critics, actor, pair, y, 0.001, rewards);
        CHECK(ec.loss == ac.loss);
        CHECK(same_grads(ec.grads, ac.grads, 0.0));
        const auto ea = erac_actor_loss(actor, critics.online, pair, y, 0.0, 0.1);
        const auto aa = ac_actor_loss(actor, critics.online, pair, y, 0.1);
        CHECK(ea.loss == aa.loss);
        CHECK(same_grads(ea.grads, aa.grads, 0.0));
    }
}

TEST_CASE("actor gradient vanishes under a constant critic") {
    const SeqSpace space(Vocab(4), 4);
    const GroundTruthPair pair{0, space.make({A, B, C, 3})};
    ParamTable actor(space, TableKind::PolicyLogits);
    Rng rng(4);
    randomize(actor, 0, rng);
    ParamTable critic(space, TableKind::QValues, 2.5);
    for (int i = 0; i < 5; ++i) {
        const Prefix y = sample_trajectory(actor, 0, rng);
        CHECK(ac_actor_loss(actor, critic, pair, y, 0.0).grads.norm() <= 1e-14);
    }
}

TEST_CASE("VAML loss is linear in kappa") {
    const SeqSpace space(Vocab(4), 4);
    const GroundTruthPair pair{0, space.make({A, B, C, 3})};
    ParamTable actor(space, TableKind::PolicyLogits);
    ParamTable critic(space, TableKind::QValues);
    Rng rng(23);
    randomize(actor, 0, rng);
    randomize(critic, 0, rng);
    const WeightedBatch batch{{pair.reference, space.make({C, 3})}, {0.7, 0.3}};
    const double l0 = vaml_loss(actor, critic, pair, batch, 0.5, 0.0).loss;
    const double l1 = vaml_loss(actor, critic, pair, batch, 0.5, 1.0).loss;
    for (double kappa : {0.2, 0.5, 0.9})
        CHECK(std::abs(vaml_loss(actor, critic, pair, batch, 0.5, kappa).loss - (kappa * l1 + (1 - kappa) * l0)) <=
              1e-12);
    CHECK(std::abs(l0 - raml_loss(actor, pair, batch).loss) <= 1e-12);
}

TEST_CASE("VAML actor loss is minimized by the token targets") {
    const auto space = toy_space();
    const SoftOracle oracle = solve_soft_oracle(space, toy_ref(), 1.0, RewardSpec::exact_match());
    ParamTable critic(space, TableKind::QValues);
    load_values(critic, 0, oracle.q);
    ParamTable actor(space, TableKind::PolicyLogits);
    // logits equal to q / tau reproduce the token target exactly
    for (const auto& [p, av] : oracle.q) actor.row(0, p) = av.values;
    const WeightedBatch batch{{toy_ref().reference}, {1.0}};
    CHECK(vaml_loss(actor, critic, toy_ref(), batch, 1.0, 1.0).grads.norm() <= 1e-14);
}

TEST_CASE("Polyak averaging") {
    const auto space = toy_space();
    CriticPair critics(space);
    critics.online.set(0, {}, A, 1.0);
    critics.target.set(0, {}, A, 3.0);
    polyak_update(critics, 0.5);
    CHECK(critics.target.value(0, {}, A) == 2.0);
    CHECK(critics.target.value(0, {}, B) == 0.0);

    critics.online.set(0, space.make({A}), kEos, 4.0);
    polyak_update(critics, 0.001);
    CHECK(critics.target.value(0, space.make({A}), kEos) == 4.0);  // new row starts at the online values

    polyak_update(critics, 1.0);
    CHECK(critics.target == critics.online);
}

TEST_CASE("sampled trajectories are complete and reproducible") {
    const SeqSpace space(Vocab(4), 4);
    ParamTable actor(space, TableKind::PolicyLogits);
    Rng a(9);
    Rng b(9);
    for (int i = 0; i < 50; ++i) {
        const Prefix y = sample_trajectory(actor, 0, a);
        CHECK(y.terminated);
        CHECK(y.size() <= 4);
        CHECK(y == sample_trajectory(actor, 0, b));
    }
}

TEST_CASE("step rewards telescope to the sequence pay-off") {
    const SeqSpace space(Vocab(4), 4);
    const GroundTruthPair pair{0, space.make({A, B, C, 3})};
    const StepRewards rewards(space, RewardSpec::scaled_bleu());
    for (const Prefix& y : space.enumerate_complete()) {
        double sum = 0.0;
        Prefix p;
        for (Token t : y.tokens) {
            sum += rewards(pair, p, t);
            p = space.transition(p, t);
        }
        CHECK(std::abs(sum - (payoff(y, pair.reference, rewards.spec()) - payoff(Prefix{}, pair.reference,
                                                                                 rewards.spec()))) <= 1e-12);
    }
}
