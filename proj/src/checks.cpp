#include "softseq/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "softseq/config.hpp"
#include "softseq/error.hpp"
#include "softseq/models.hpp"
#include "softseq/numeric.hpp"
#include "softseq/sampling.hpp"
#include "softseq/trainers.hpp"

namespace softseq {

namespace {

// Tracks the worst deviation seen against a fixed tolerance.
struct Worst {
    double value = 0.0;
    void see(double x) {
        if (std::isnan(x)) x = INFINITY;
        value = std::max(value, x);
    }
};

CheckResult make_result(std::string name, double measured, double tolerance, std::string detail = {}) {
    return {std::move(name), measured <= tolerance, measured, tolerance, std::move(detail)};
}

RewardSpec uniform_table_reward(const SeqSpace& space, Rng& rng) {
    RewardSpec::Table table;
    for (const Prefix& y : space.enumerate_complete()) table[y.content()] = rng.uniform01();
    return RewardSpec::tabulated(std::move(table));
}

Prefix random_reference(const SeqSpace& space, Rng& rng) {
    const auto content = space.vocab().content_tokens();
    std::vector<Token> tokens;
    const auto len = rng.uniform_index(static_cast<std::uint64_t>(space.horizon()));
    for (std::uint64_t i = 0; i < len; ++i) tokens.push_back(content[rng.uniform_index(content.size())]);
    tokens.push_back(space.vocab().eos());
    return space.make(std::move(tokens));
}

void randomize_table(ParamTable& table, int example, Rng& rng, double lo, double hi) {
    for (const Prefix& p : table.space().enumerate_prefixes())
        for (double& x : table.row(example, p)) x = lo + (hi - lo) * rng.uniform01();
}

// Softmax over raw table values, written out here so the brute-force side of
// each check does not share code with policy_dist.
std::vector<double> row_softmax(const ParamTable& t, int example, const Prefix& p, double tau) {
    const auto x = t.values(example, p);
    const double m = *std::max_element(x.begin(), x.end());
    std::vector<double> out(x.size());
    double z = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) z += out[i] = std::exp((x[i] - m) / tau);
    for (double& v : out) v /= z;
    return out;
}

std::size_t position(const std::vector<Token>& tokens, Token t) {
    return static_cast<std::size_t>(std::find(tokens.begin(), tokens.end(), t) - tokens.begin());
}

// Probability of a complete sequence as the product of per-step softmaxes.
double sequence_prob(const ParamTable& t, int example, const Prefix& y, double tau = 1.0) {
    const SeqSpace& space = t.space();
    double p = 1.0;
    Prefix s;
    for (Token w : y.tokens) {
        p *= row_softmax(t, example, s, tau)[position(space.allowed_tokens(s), w)];
        s = space.transition(s, w);
    }
    return p;
}

// J(theta) = E_y[R(y) - R(empty) + tau * sum_t H(pi(.|y_<t))] by full enumeration.
double entropy_regularized_return(const ParamTable& actor, const GroundTruthPair& pair, double tau,
                                  const RewardSpec& spec) {
    const SeqSpace& space = actor.space();
    const double base = payoff({}, pair.reference, spec);
    double j = 0.0;
    for (const Prefix& y : space.enumerate_complete()) {
        double ret = payoff(y, pair.reference, spec) - base;
        Prefix s;
        for (Token w : y.tokens) {
            double h = 0.0;
            for (double p : row_softmax(actor, pair.example_id, s, 1.0))
                if (p > 0.0) h -= p * std::log(p);
            ret += tau * h;
            s = space.transition(s, w);
        }
        j += sequence_prob(actor, pair.example_id, y) * ret;
    }
    return j;
}

double relative_error(double a, double f) { return std::abs(a - f) / std::max(1e-8, std::abs(a) + std::abs(f)); }

PolicyFn actor_policy(const ParamTable& actor, int example) {
    return [&actor, example](const Prefix& p) { return policy_dist(actor, example, p); };
}

struct GradInstance {
    SeqSpace space{Vocab(4), 3};
    GroundTruthPair pair{0, space.make({0, 1, 3})};
    RewardSpec spec = RewardSpec::scaled_bleu();
    ParamTable actor{space, TableKind::PolicyLogits};
    CriticPair critics{space};
    std::vector<Prefix> trajectories;
    WeightedBatch batch;
};

GradInstance gradient_instance() {
    GradInstance g;
    Rng rng(20240607);
    randomize_table(g.actor, 0, rng, -1.5, 1.5);
    randomize_table(g.critics.online, 0, rng, -1.0, 1.0);
    randomize_table(g.critics.target, 0, rng, -1.0, 1.0);
    g.trajectories = {g.space.make({0, 1, 3}), g.space.make({2, 3}), g.space.make({3}), g.space.make({1, 1, 3})};
    auto samples = draw_proposal_batch(g.space.vocab(), g.pair.reference, rng, {4, 5, true});
    g.batch = normalized_payoff_weights(std::move(samples), g.pair.reference, 0.4, g.spec);
    return g;
}

}  // namespace

std::vector<OracleInstance> randomized_oracle_instances(int count, std::uint64_t seed) {
    static constexpr int kVocab[] = {3, 4};
    static constexpr int kHorizon[] = {3, 4, 5};
    static constexpr double kTau[] = {0.3, 1.0, 3.0};
    Rng rng(seed);
    std::vector<OracleInstance> out;
    for (int i = 0; i < count; ++i) {
        const SeqSpace space(Vocab(kVocab[i % 2]), kHorizon[(i / 2) % 3]);
        const double tau = kTau[(i / 6) % 3];
        Prefix ref = random_reference(space, rng);
        RewardSpec spec = uniform_table_reward(space, rng);
        out.push_back({space, {i, std::move(ref)}, tau, std::move(spec)});
    }
    return out;
}

CheckResult check_marginal_match(const std::vector<OracleInstance>& instances) {
    Worst worst;
    for (const auto& in : instances) {
        const auto pr = exact_pr(in.space, in.ref, in.tau, in.spec);
        const auto m = induced_marginal(solve_soft_oracle(in.space, in.ref, in.tau, in.spec));
        for (std::size_t i = 0; i < m.support.size(); ++i) worst.see(std::abs(m.probs[i] - pr.prob(m.support[i])));
    }
    return make_result("marginal-match", worst.value, 1e-9, std::to_string(instances.size()) + " instances");
}

CheckResult check_terminal_condition(const std::vector<OracleInstance>& instances) {
    Worst worst;
    std::size_t prefixes = 0;
    for (const auto& in : instances) {
        for (const auto& o : {solve_soft_oracle(in.space, in.ref, in.tau, in.spec),
                              oracle_from_marginals(in.space, in.ref, in.tau, in.spec)}) {
            for (const auto& [p, av] : o.q) {
                worst.see(std::abs(av.at(in.space.vocab().eos())));
                ++prefixes;
            }
        }
    }
    return make_result("terminal-condition", worst.value, 1e-12, std::to_string(prefixes) + " prefixes");
}

CheckResult check_oracle_equivalence(const std::vector<OracleInstance>& instances) {
    Worst worst;
    for (const auto& in : instances) {
        const auto a = solve_soft_oracle(in.space, in.ref, in.tau, in.spec);
        const auto b = oracle_from_marginals(in.space, in.ref, in.tau, in.spec);
        const auto c = soft_value_iteration(in.space, in.ref, in.tau, in.spec, in.space.horizon());
        worst.see(max_abs_difference(a, b));
        worst.see(max_abs_difference(a, c));
        worst.see(max_abs_difference(b, c));
    }
    return make_result("oracle-equivalence", worst.value, 1e-9, std::to_string(instances.size()) + " instances");
}

CheckResult check_softq_convergence() {
    const SeqSpace space(Vocab(3), 2);
    const GroundTruthPair pair{0, space.make({0, 2})};
    const double tau = 1.0;
    const auto spec = RewardSpec::exact_match();
    const auto oracle = solve_soft_oracle(space, pair, tau, spec);
    const StepRewards rewards(space, spec);
    const auto ys = space.enumerate_complete();
    ParamTable critic(space, TableKind::QValues);
    Optimizer opt({OptimizerKind::PlainGradient, 0.1});

    auto q_error = [&] {
        double e = 0.0;
        for (const auto& [p, av] : oracle.q) {
            const auto got = critic.values(0, p);
            for (std::size_t i = 0; i < got.size(); ++i) e = std::max(e, std::abs(got[i] - av.values[i]));
        }
        return e;
    };
    auto worst_kl = [&] {
        double k = 0.0;
        for (const auto& [p, av] : oracle.q)
            k = std::max(k, kl_divergence(softmax(av.values, tau), softmax(critic.values(0, p), tau)));
        return k;
    };

    int steps = 0;
    for (; steps < 5000 && !(q_error() <= 1e-3 && worst_kl() <= 1e-5); ++steps) {
        GradAccumulator total;
        for (const Prefix& y : ys) total.merge(softq_loss(critic, pair, y, tau, rewards).grads);
        opt.step(critic, total);
    }
    const double err = q_error();
    const double kl = worst_kl();
    CheckResult r = make_result("softq-convergence", err, 1e-3);
    r.passed = err <= 1e-3 && kl <= 1e-5;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d steps, max KL %.3g (tol 1e-05)", steps, kl);
    r.detail = buf;
    return r;
}

CheckResult check_policy_evaluation_fixed_point() {
    const SeqSpace space(Vocab(3), 3);
    const GroundTruthPair pair{0, space.make({0, 1, 2})};
    const double tau = 0.5;
    const auto spec = RewardSpec::scaled_bleu();
    const StepRewards rewards(space, spec);
    const ParamTable actor(space, TableKind::PolicyLogits);  // uniform
    const auto exact = policy_evaluation(space, actor_policy(actor, 0), pair, tau, spec);
    const auto ys = space.enumerate_complete();

    CriticPair loaded(space);
    load_values(loaded.online, 0, exact.q);
    load_values(loaded.target, 0, exact.q);
    double td_at_exact = 0.0;
    for (const Prefix& y : ys) td_at_exact += erac_critic_loss(loaded, actor, pair, y, tau, 0.0, rewards).loss;

    CriticPair critics(space);
    Optimizer opt({OptimizerKind::PlainGradient, 0.1});
    auto error = [&] {
        double e = 0.0;
        for (const auto& [p, av] : exact.q) {
            const auto got = critics.online.values(0, p);
            for (std::size_t i = 0; i < got.size(); ++i) e = std::max(e, std::abs(got[i] - av.values[i]));
        }
        return e;
    };
    int steps = 0;
    for (; steps < 20000 && error() > 1e-4; ++steps) {
        GradAccumulator total;
        for (const Prefix& y : ys) total.merge(erac_critic_loss(critics, actor, pair, y, tau, 0.0, rewards).grads);
        opt.step(critics.online, total);
        polyak_update(critics, 0.5);
    }
    const double err = error();
    CheckResult r = make_result("policy-evaluation-fixed-point", err, 1e-3);
    r.passed = err <= 1e-3 && td_at_exact <= 1e-9;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d steps, TD loss at exact values %.3g (tol 1e-09)", steps, td_at_exact);
    r.detail = buf;
    return r;
}

CheckResult check_policy_gradient_theorem() {
    struct Case {
        SeqSpace space;
        GroundTruthPair pair;
        RewardSpec spec;
    };
    const SeqSpace toy(Vocab(3), 2);
    const SeqSpace deeper(Vocab(3), 3);
    const std::vector<Case> cases = {{toy, {0, toy.make({0, 2})}, RewardSpec::exact_match()},
                                     {deeper, {0, deeper.make({0, 1, 2})}, RewardSpec::scaled_bleu()}};
    Rng rng(31337);
    Worst worst;
    int policies = 0;
    for (const auto& c : cases) {
        for (double tau : {0.05, 0.5}) {
            for (int k = 0; k < 10; ++k, ++policies) {
                ParamTable actor(c.space, TableKind::PolicyLogits);
                randomize_table(actor, 0, rng, -2.0, 2.0);
                const auto pe = policy_evaluation(c.space, actor_policy(actor, 0), c.pair, tau, c.spec);
                ParamTable critic(c.space, TableKind::QValues);
                load_values(critic, 0, pe.q);

                GradAccumulator expected;
                for (const Prefix& y : c.space.enumerate_complete()) {
                    const LossGrad lg = erac_actor_loss(actor, critic, c.pair, y, tau, 0.0);
                    expected.merge(lg.grads, -sequence_prob(actor, 0, y));
                }
                const double eps = 1e-5;
                for (auto& [key, row] : actor.mutable_rows()) {
                    const auto it = expected.rows().find(key);
                    for (std::size_t i = 0; i < row.size(); ++i) {
                        const double saved = row[i];
                        row[i] = saved + eps;
                        const double up = entropy_regularized_return(actor, c.pair, tau, c.spec);
                        row[i] = saved - eps;
                        const double down = entropy_regularized_return(actor, c.pair, tau, c.spec);
                        row[i] = saved;
                        const double a = it == expected.rows().end() ? 0.0 : it->second[i];
                        worst.see(relative_error(a, (up - down) / (2.0 * eps)));
                    }
                }
            }
        }
    }
    return make_result("policy-gradient-theorem", worst.value, 1e-4, std::to_string(policies) + " random policies");
}

CheckResult check_ce_decomposition() {
    const SeqSpace toy(Vocab(3), 2);
    const SeqSpace deeper(Vocab(4), 4);
    Rng rng(777);
    Worst worst;
    for (const SeqSpace& space : {toy, deeper}) {
        const GroundTruthPair pair{0, space.make({0, space.vocab().eos()})};
        for (double tau : {1.0, 0.5}) {
            for (int k = 0; k < 5; ++k) {
                ParamTable critic(space, TableKind::QValues);
                ParamTable actor(space, TableKind::PolicyLogits);
                randomize_table(critic, 0, rng, -1.0, 1.0);
                randomize_table(actor, 0, rng, -1.0, 1.0);
                WeightedBatch batch;
                double sequence_ce = 0.0;
                for (const Prefix& y : space.enumerate_complete()) {
                    const double p = sequence_prob(critic, 0, y, tau);
                    sequence_ce -= p * std::log(sequence_prob(actor, 0, y));
                    batch.samples.push_back(y);
                    batch.weights.push_back(p);
                }
                const double token_ce = vaml_loss(actor, critic, pair, batch, tau, 1.0).loss;
                worst.see(std::abs(sequence_ce - token_ce));
            }
        }
    }
    return make_result("ce-decomposition", worst.value, 1e-10, "20 (critic, actor) pairs");
}

CheckResult check_raml_consistency() {
    Worst ce_gap;
    Worst weight_sum;
    Rng rng(4242);
    auto instances = randomized_oracle_instances(12, 99);
    const SeqSpace toy(Vocab(3), 2);
    instances.push_back({toy, {0, toy.make({0, 2})}, 1.0, RewardSpec::exact_match()});
    for (const auto& in : instances) {
        ParamTable actor(in.space, TableKind::PolicyLogits);
        randomize_table(actor, in.ref.example_id, rng, -1.0, 1.0);
        const auto pr = exact_pr(in.space, in.ref, in.tau, in.spec);
        const WeightedBatch batch{pr.support, pr.probs};
        double brute = 0.0;
        for (std::size_t i = 0; i < pr.support.size(); ++i)
            brute -= pr.probs[i] * std::log(sequence_prob(actor, in.ref.example_id, pr.support[i]));
        ce_gap.see(std::abs(raml_loss(actor, in.ref, batch).loss - brute));

        double s = 0.0;
        for (double p : pr.probs) s += p;
        weight_sum.see(std::abs(s - 1.0));
        if (in.ref.reference.content().empty()) continue;
        for (double tau : {0.01, 0.05, 0.4, 1.0, 3.0}) {
            for (int k = 0; k < 5; ++k) {
                auto samples = draw_proposal_batch(in.space.vocab(), in.ref.reference, rng, {4, 5, true});
                const auto wb = normalized_payoff_weights(std::move(samples), in.ref.reference, tau,
                                                          RewardSpec::scaled_bleu());
                double t = 0.0;
                for (double w : wb.weights) t += w;
                weight_sum.see(std::abs(t - 1.0));
            }
        }
    }
    CheckResult r = make_result("raml-consistency", ce_gap.value, 1e-10);
    r.passed = ce_gap.value <= 1e-10 && weight_sum.value <= 1e-12;
    char buf[96];
    std::snprintf(buf, sizeof buf, "max |sum w - 1| %.3g (tol 1e-12)", weight_sum.value);
    r.detail = buf;
    return r;
}

CheckResult check_gradients() {
    const GradInstance g = gradient_instance();
    const StepRewards rewards(g.space, g.spec);
    auto over_trajectories = [&](auto&& loss) {
        return [&, loss](const ParamTable& t) {
            LossGrad total;
            for (const Prefix& y : g.trajectories) {
                LossGrad lg = loss(t, y);
                total.loss += lg.loss;
                total.grads.merge(lg.grads);
            }
            return total;
        };
    };
    auto critic_pair = [&](const ParamTable& online) {
        CriticPair c = g.critics;
        c.online = online;
        return c;
    };

    struct Named {
        std::string name;
        LossFn fn;
        const ParamTable* table;
    };
    std::vector<Named> losses;
    losses.push_back({"mle", [&](const ParamTable& t) { return mle_loss(t, g.pair); }, &g.actor});
    losses.push_back({"raml", [&](const ParamTable& t) { return raml_loss(t, g.pair, g.batch); }, &g.actor});
    losses.push_back({"softq", over_trajectories([&](const ParamTable& t, const Prefix& y) {
                          return softq_loss(t, g.pair, y, 0.4, rewards);
                      }),
                      &g.critics.online});
    for (double kappa : {0.0, 0.2, 1.0})
        losses.push_back({"vaml-kappa-" + std::to_string(kappa).substr(0, 3),
                          [&, kappa](const ParamTable& t) {
                              return vaml_loss(t, g.critics.online, g.pair, g.batch, 0.4, kappa);
                          },
                          &g.actor});
    losses.push_back({"erac-critic", over_trajectories([&](const ParamTable& t, const Prefix& y) {
                          return erac_critic_loss(critic_pair(t), g.actor, g.pair, y, 0.05, 0.1, rewards);
                      }),
                      &g.critics.online});
    losses.push_back({"erac-actor", over_trajectories([&](const ParamTable& t, const Prefix& y) {
                          return erac_actor_loss(t, g.critics.online, g.pair, y, 0.05, 0.1);
                      }),
                      &g.actor});
    losses.push_back({"ac-critic", over_trajectories([&](const ParamTable& t, const Prefix& y) {
                          return ac_critic_loss(critic_pair(t), g.actor, g.pair, y, 0.1, rewards);
                      }),
                      &g.critics.online});
    losses.push_back({"ac-actor", over_trajectories([&](const ParamTable& t, const Prefix& y) {
                          return ac_actor_loss(t, g.critics.online, g.pair, y, 0.1);
                      }),
                      &g.actor});

    Worst worst;
    std::string worst_name;
    std::size_t max_params = 0;
    for (const auto& l : losses) {
        const auto report = fd_gradcheck(l.fn, *l.table);
        if (report.max_rel_error >= worst.value) worst_name = l.name;
        worst.see(report.max_rel_error);
        max_params = std::max(max_params, report.parameters);
    }
    return make_result("gradient-check", worst.value, 1e-5,
                       std::to_string(losses.size()) + " losses, <= " + std::to_string(max_params) +
                           " parameters, worst " + worst_name);
}

std::vector<CheckResult> check_module_invariants() {
    std::vector<CheckResult> out;

    {  // enumeration sizes and transition injectivity
        Worst bad;
        for (int w = 1; w <= 4; ++w)
            for (int t = 1; t <= 5; ++t) {
                const SeqSpace space(Vocab(w), t);
                double expected = 0.0;
                for (int l = 0; l < t; ++l) expected += std::pow(w - 1.0, l);
                bad.see(std::abs(static_cast<double>(space.enumerate_complete().size()) - expected));
                std::set<Prefix> seen;
                std::size_t edges = 0;
                for (const Prefix& p : space.enumerate_prefixes())
                    for (Token a : space.allowed_tokens(p)) {
                        seen.insert(space.transition(p, a));
                        ++edges;
                    }
                bad.see(static_cast<double>(edges - seen.size()));
            }
        out.push_back(make_result("seq-space-enumeration", bad.value, 0.0));
    }

    {  // incremental pay-offs telescope and eos adds nothing
        const SeqSpace space(Vocab(4), 5);
        Rng rng(3);
        const Prefix ref = space.make({0, 2, 1, 0, 3});
        Worst worst;
        for (const auto& spec : {RewardSpec::exact_match(), RewardSpec::prefix_match(), RewardSpec::scaled_bleu(),
                                 uniform_table_reward(space, rng)}) {
            for (const Prefix& y : space.enumerate_complete()) {
                double sum = 0.0;
                Prefix s;
                for (Token a : y.tokens) {
                    const double r = incremental_payoff(space, s, a, ref, spec);
                    if (a == space.vocab().eos()) worst.see(std::abs(r));
                    sum += r;
                    s = space.transition(s, a);
                }
                worst.see(std::abs(sum - (payoff(y, ref, spec) - payoff({}, ref, spec))));
            }
        }
        out.push_back(make_result("reward-telescoping", worst.value, 1e-12));
    }

    const auto instances = randomized_oracle_instances(12, 5);

    {  // soft Bellman consistency of the solved oracle
        Worst worst;
        for (const auto& in : instances) {
            const auto o = solve_soft_oracle(in.space, in.ref, in.tau, in.spec);
            for (const auto& [p, av] : o.q) {
                worst.see(std::abs(o.v.at(p) - soft_max_value(av.values, in.tau)));
                for (std::size_t i = 0; i < av.tokens.size(); ++i) {
                    const Prefix next = in.space.transition(p, av.tokens[i]);
                    const double boot = next.terminated ? 0.0 : o.v.at(next);
                    const double r = incremental_payoff(in.space, p, av.tokens[i], in.ref.reference, in.spec);
                    worst.see(std::abs(av.values[i] - (r + boot)));
                }
            }
        }
        out.push_back(make_result("oracle-bellman-consistency", worst.value, 1e-12));
    }

    {  // shift invariance of token targets and the log-partition identity
        Worst shift;
        Worst partition;
        for (const auto& in : instances) {
            auto o = solve_soft_oracle(in.space, in.ref, in.tau, in.spec);
            const double base = payoff({}, in.ref.reference, in.spec);
            std::vector<double> scaled;
            for (const Prefix& y : in.space.enumerate_complete())
                scaled.push_back((payoff(y, in.ref.reference, in.spec) - base) / in.tau);
            partition.see(std::abs(o.v_value({}) - in.tau * logsumexp(scaled)));
            const auto before = token_target(o, {});
            for (double& q : o.q.at({}).values) q += 3.75;
            const auto after = token_target(o, {});
            for (std::size_t i = 0; i < before.probs.size(); ++i)
                shift.see(std::abs(before.probs[i] - after.probs[i]));
        }
        out.push_back(make_result("token-target-shift-invariance", shift.value, 1e-12));
        out.push_back(make_result("log-partition-identity", partition.value, 1e-9));
    }

    {  // optimal policy is a fixed point of policy evaluation
        Worst worst;
        for (std::size_t k = 0; k < 4; ++k) {
            const auto& in = instances[k];
            const auto o = solve_soft_oracle(in.space, in.ref, in.tau, in.spec);
            const auto pe = policy_evaluation(
                in.space, [&](const Prefix& p) { return token_target(o, p); }, in.ref, in.tau, in.spec);
            for (const auto& [p, av] : o.q) {
                worst.see(std::abs(pe.v.at(p) - o.v.at(p)));
                for (std::size_t i = 0; i < av.values.size(); ++i)
                    worst.see(std::abs(pe.q.at(p).values[i] - av.values[i]));
            }
        }
        out.push_back(make_result("optimal-policy-fixed-point", worst.value, 1e-9));
    }

    {  // policy softmax normalization and shift invariance
        const SeqSpace space(Vocab(5), 4);
        ParamTable actor(space, TableKind::PolicyLogits);
        Rng rng(12);
        randomize_table(actor, 0, rng, -4.0, 4.0);
        Worst worst;
        for (const Prefix& p : space.enumerate_prefixes()) {
            const auto a = policy_dist(actor, 0, p);
            double s = 0.0;
            for (double x : a.probs) s += x;
            worst.see(std::abs(s - 1.0));
            for (double& x : actor.row(0, p)) x -= 41.0;
            const auto b = policy_dist(actor, 0, p);
            for (std::size_t i = 0; i < a.probs.size(); ++i) worst.see(std::abs(a.probs[i] - b.probs[i]));
        }
        out.push_back(make_result("policy-softmax", worst.value, 1e-12));
    }

    {  // Soft-Q fixed point: an oracle-loaded critic has zero residual everywhere
        Worst worst;
        for (std::size_t k = 0; k < 6; ++k) {
            const auto& in = instances[k];
            const auto o = solve_soft_oracle(in.space, in.ref, in.tau, in.spec);
            ParamTable critic(in.space, TableKind::QValues);
            load_values(critic, in.ref.example_id, o.q);
            const StepRewards rewards(in.space, in.spec);
            for (const Prefix& y : in.space.enumerate_complete())
                worst.see(softq_loss(critic, in.ref, y, in.tau, rewards).loss);
        }
        out.push_back(make_result("softq-fixed-point", worst.value, 1e-9));
    }

    const GradInstance g = gradient_instance();
    const StepRewards rewards(g.space, g.spec);

    {  // kappa-linearity and kappa = 0 equals RAML
        Worst worst;
        const double l0 = vaml_loss(g.actor, g.critics.online, g.pair, g.batch, 0.4, 0.0).loss;
        const double l1 = vaml_loss(g.actor, g.critics.online, g.pair, g.batch, 0.4, 1.0).loss;
        for (double kappa : {0.1, 0.2, 0.7}) {
            const double lk = vaml_loss(g.actor, g.critics.online, g.pair, g.batch, 0.4, kappa).loss;
            worst.see(std::abs(lk - (kappa * l1 + (1.0 - kappa) * l0)));
        }
        worst.see(std::abs(l0 - raml_loss(g.actor, g.pair, g.batch).loss));
        out.push_back(make_result("vaml-kappa-linearity", worst.value, 1e-12));
    }

    {  // smoothing is nonnegative and vanishes exactly for constant rows
        Worst worst;
        double min_smoothing = 0.0;
        for (const Prefix& y : g.trajectories) {
            const double with = erac_critic_loss(g.critics, g.actor, g.pair, y, 0.05, 1.0, rewards).loss;
            const double without = erac_critic_loss(g.critics, g.actor, g.pair, y, 0.05, 0.0, rewards).loss;
            min_smoothing = std::min(min_smoothing, with - without);
            CriticPair flat = g.critics;
            for (auto& [_, row] : flat.online.mutable_rows()) std::fill(row.begin(), row.end(), row.front());
            const double a = erac_critic_loss(flat, g.actor, g.pair, y, 0.05, 1.0, rewards).loss;
            const double b = erac_critic_loss(flat, g.actor, g.pair, y, 0.05, 0.0, rewards).loss;
            worst.see(std::abs(a - b));
        }
        worst.see(-min_smoothing);
        out.push_back(make_result("smoothing-term", worst.value, 0.0));
    }

    {  // tau = 0 ERAC is bitwise plain AC
        bool same = true;
        for (const Prefix& y : g.trajectories) {
            const auto ec = erac_critic_loss(g.critics, g.actor, g.pair, y, 0.0, 0.001, rewards);
            const auto ac = ac_critic_loss(g.critics, g.actor, g.pair, y, 0.001, rewards);
            const auto ea = erac_actor_loss(g.actor, g.critics.online, g.pair, y, 0.0, 0.1);
            const auto aa = ac_actor_loss(g.actor, g.critics.online, g.pair, y, 0.1);
            same = same && ec.loss == ac.loss && ec.grads.rows() == ac.grads.rows();
            same = same && ea.loss == aa.loss && ea.grads.rows() == aa.grads.rows();
        }
        out.push_back(make_result("erac-tau0-equals-ac", same ? 0.0 : 1.0, 0.0));
    }

    {  // target network interpolation closed form
        Worst worst;
        CriticPair c(g.space);
        c.online.set(0, {}, 0, 1.0);
        c.target.set(0, {}, 0, 0.0);
        polyak_update(c, 0.001);
        worst.see(std::abs(c.target.value(0, {}, 0) - 0.001));
        for (int k = 2; k <= 50; ++k) polyak_update(c, 0.001);
        worst.see(std::abs((1.0 - c.target.value(0, {}, 0)) - std::pow(0.999, 50)));
        CriticPair d = g.critics;
        polyak_update(d, 1.0);
        worst.see(d.target == d.online ? 0.0 : 1.0);
        out.push_back(make_result("polyak-update", worst.value, 1e-12));
    }

    {  // exhaustive pay-off weights reproduce P_R
        Worst worst;
        for (std::size_t k = 0; k < 6; ++k) {
            const auto& in = instances[k];
            const auto pr = exact_pr(in.space, in.ref, in.tau, in.spec);
            const auto wb = normalized_payoff_weights(pr.support, in.ref.reference, in.tau, in.spec);
            for (std::size_t i = 0; i < wb.weights.size(); ++i) worst.see(std::abs(wb.weights[i] - pr.probs[i]));
        }
        out.push_back(make_result("exhaustive-weights-equal-pr", worst.value, 1e-10));
    }

    {  // proposal draws stay inside Y with unchanged length
        const SeqSpace space(Vocab(6), 6);
        const Prefix ref = space.make({0, 1, 2, 3, 4, 5});
        Rng rng(8);
        double bad = 0.0;
        for (int k = 0; k < 500; ++k) {
            const Prefix y = ngram_replace(space.vocab(), ref, rng, {});
            try {
                if (space.make(y.tokens) != y || y.size() != ref.size()) bad += 1.0;
            } catch (const Error&) {
                bad += 1.0;
            }
        }
        out.push_back(make_result("ngram-proposal-validity", bad, 0.0));
    }

    {  // checkpoints, oracle dumps and configs round-trip; optimizers are deterministic
        double bad = 0.0;
        std::stringstream ck;
        write_checkpoint(ck, g.critics.online);
        if (!(read_checkpoint(ck) == g.critics.online)) bad += 1.0;

        std::ostringstream d1;
        std::ostringstream d2;
        const auto& in = instances.front();
        write_oracle_dump(d1, solve_soft_oracle(in.space, in.ref, in.tau, in.spec));
        write_oracle_dump(d2, solve_soft_oracle(in.space, in.ref, in.tau, in.spec));
        if (d1.str() != d2.str()) bad += 1.0;

        ExperimentConfig cfg;
        cfg.trainer.tau = 0.123456789012345;
        cfg.trainer.joint.epochs = 7;
        const std::string text = serialize_config(cfg);
        if (serialize_config(parse_config(text)) != text || !(parse_config(text) == cfg)) bad += 1.0;

        OptimizerSettings s;
        s.kind = OptimizerKind::AdaptiveMoments;
        s.step_size = 0.01;
        ParamTable a = g.actor;
        ParamTable b = g.actor;
        Optimizer oa(s);
        Optimizer ob(s);
        for (int k = 0; k < 3; ++k) {
            oa.step(a, mle_loss(a, g.pair).grads);
            ob.step(b, mle_loss(b, g.pair).grads);
        }
        if (!(a == b)) bad += 1.0;
        out.push_back(make_result("serialization-and-determinism", bad, 0.0));
    }

    return out;
}

CheckResult check_mutation_smoke() {
    int caught = 0;
    std::string missed;
    for (Atom atom : {Atom::NegLogProb, Atom::ExpectedValue, Atom::Entropy, Atom::CrossEntropy}) {
        inject_atom_sign_fault(atom);
        bool failed = false;
        try {
            failed = !check_gradients().passed;
        } catch (...) {
            inject_atom_sign_fault(std::nullopt);
            throw;
        }
        inject_atom_sign_fault(std::nullopt);
        if (failed)
            ++caught;
        else
            missed += " atom" + std::to_string(static_cast<int>(atom));
    }
    CheckResult r = make_result("mutation-smoke", 4.0 - caught, 0.0);
    r.detail = std::to_string(caught) + "/4 injected sign faults caught" + missed;
    return r;
}

std::vector<CheckResult> run_check_suite() {
    const auto instances = randomized_oracle_instances(50, 2024);
    std::vector<CheckResult> out = {check_marginal_match(instances),
                                    check_terminal_condition(instances),
                                    check_oracle_equivalence(instances),
                                    check_softq_convergence(),
                                    check_policy_evaluation_fixed_point(),
                                    check_policy_gradient_theorem(),
                                    check_ce_decomposition(),
                                    check_raml_consistency(),
                                    check_gradients()};
    for (auto& r : check_module_invariants()) out.push_back(std::move(r));
    out.push_back(check_mutation_smoke());
    return out;
}

std::string format_check(const CheckResult& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s %-32s measured=%.3g tol=%.3g", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                  r.measured, r.tolerance);
    std::string line = buf;
    if (!r.detail.empty()) line += "  (" + r.detail + ")";
    return line;
}

}  // namespace softseq
