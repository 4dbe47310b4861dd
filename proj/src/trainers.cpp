#include "softseq/trainers.hpp"

#include <algorithm>
#include <cmath>

#include "softseq/error.hpp"
#include "softseq/numeric.hpp"

namespace softseq {

namespace {

std::size_t index_in(const std::vector<Token>& tokens, Token t) {
    const auto it = std::lower_bound(tokens.begin(), tokens.end(), t);
    if (it == tokens.end() || *it != t) throw Error(ErrorKind::ForbiddenToken, "token not allowed at this prefix");
    return static_cast<std::size_t>(it - tokens.begin());
}

void require_complete(const Prefix& y) {
    if (!y.terminated) throw Error(ErrorKind::InvalidArgument, "trajectory must be terminated");
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Smoothing term at one prefix: lambda * sum_w (q_w - mean)^2. The mean's own
// derivative cancels, leaving 2 lambda (q_w - mean).
double add_smoothing(const ParamTable& critic, int example, const Prefix& prefix, double lambda_var,
                     GradAccumulator& grads) {
    if (lambda_var == 0.0) return 0.0;
    const auto q = critic.values(example, prefix);
    double mean = 0.0;
    for (double x : q) mean += x;
    mean /= static_cast<double>(q.size());
    double loss = 0.0;
    auto& g = grads.row(example, prefix, q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double d = q[i] - mean;
        loss += d * d;
        g[i] += 2.0 * lambda_var * d;
    }
    return lambda_var * loss;
}

// Shared TD walk for the entropy-regularized and plain critics. `bootstrap`
// returns the value of the successor prefix under the target critic.
template <typename Bootstrap>
LossGrad td_critic_loss(const CriticPair& critics, const GroundTruthPair& pair, const Prefix& trajectory,
                        double lambda_var, const StepRewards& rewards, Bootstrap&& bootstrap) {
    require_complete(trajectory);
    const SeqSpace& space = critics.online.space();
    const int ex = pair.example_id;
    LossGrad out;
    Prefix s;
    for (Token a : trajectory.tokens) {
        const Prefix next = space.transition(s, a);
        double target = rewards(pair, s, a);
        if (!next.terminated) target = target + bootstrap(next);
        const auto tokens = space.allowed_tokens(s);
        const std::size_t k = index_in(tokens, a);
        const double residual = critics.online.values(ex, s)[k] - target;
        out.loss += residual * residual;
        out.grads.add(ex, s, tokens.size(), k, 2.0 * residual);
        out.loss += add_smoothing(critics.online, ex, s, lambda_var, out.grads);
        s = next;
    }
    return out;
}

}  // namespace

StepRewards::StepRewards(SeqSpace space, RewardSpec spec, bool cache)
    : space_(std::move(space)), spec_(std::move(spec)), cache_enabled_(cache) {}

double StepRewards::payoff(const GroundTruthPair& pair, const Prefix& y) const {
    if (!cache_enabled_) return softseq::payoff(y, pair.reference, spec_);
    RowKey key{pair.example_id, y};
    const auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const double r = softseq::payoff(y, pair.reference, spec_);
    cache_.emplace(std::move(key), r);
    return r;
}

double StepRewards::operator()(const GroundTruthPair& pair, const Prefix& prefix, Token token) const {
    const Prefix next = space_.transition(prefix, token);
    return payoff(pair, next) - payoff(pair, prefix);
}

LossGrad mle_loss(const ParamTable& actor, const GroundTruthPair& pair) {
    LossGrad out;
    Prefix s;
    for (Token t : pair.reference.tokens) {
        out.loss += add_neg_log_prob(actor, pair.example_id, s, t, 1.0, out.grads);
        s = actor.space().transition(s, t);
    }
    return out;
}

LossGrad raml_loss(const ParamTable& actor, const GroundTruthPair& pair, const WeightedBatch& batch) {
    LossGrad out;
    for (std::size_t i = 0; i < batch.samples.size(); ++i) {
        const double w = batch.weights[i];
        Prefix s;
        for (Token t : batch.samples[i].tokens) {
            out.loss += add_neg_log_prob(actor, pair.example_id, s, t, w, out.grads);
            s = actor.space().transition(s, t);
        }
    }
    return out;
}

LossGrad softq_loss(const ParamTable& critic, const GroundTruthPair& pair, const Prefix& trajectory, double tau,
                    const StepRewards& rewards) {
    require_complete(trajectory);
    if (!(tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "soft Q-learning needs tau > 0");
    const SeqSpace& space = critic.space();
    const int ex = pair.example_id;
    LossGrad out;
    Prefix s;
    for (Token a : trajectory.tokens) {
        const Prefix next = space.transition(s, a);
        double target = rewards(pair, s, a);
        std::vector<double> next_q;
        if (!next.terminated) {
            next_q = critic.values(ex, next);
            target += soft_max_value(next_q, tau);
        }
        const auto tokens = space.allowed_tokens(s);
        const std::size_t k = index_in(tokens, a);
        const double residual = critic.values(ex, s)[k] - target;
        out.loss += residual * residual;
        out.grads.add(ex, s, tokens.size(), k, 2.0 * residual);
        if (!next.terminated) {
            const auto weights = softmax(next_q, tau);
            auto& g = out.grads.row(ex, next, weights.size());
            for (std::size_t i = 0; i < weights.size(); ++i) g[i] -= 2.0 * residual * weights[i];
        }
        s = next;
    }
    return out;
}

LossGrad vaml_loss(const ParamTable& actor, const ParamTable& critic, const GroundTruthPair& pair,
                   const WeightedBatch& batch, double tau, double kappa) {
    if (!(tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "token targets need tau > 0");
    if (kappa < 0.0 || kappa > 1.0) throw Error(ErrorKind::InvalidArgument, "kappa must lie in [0, 1]");
    LossGrad out;
    const int ex = pair.example_id;
    for (std::size_t i = 0; i < batch.samples.size(); ++i) {
        const double w = batch.weights[i];
        Prefix s;
        for (Token t : batch.samples[i].tokens) {
            const auto target = softmax(critic.values(ex, s), tau);
            out.loss += add_cross_entropy(actor, ex, s, target, w * kappa, out.grads);
            out.loss += add_neg_log_prob(actor, ex, s, t, w * (1.0 - kappa), out.grads);
            s = actor.space().transition(s, t);
        }
    }
    return out;
}

LossGrad erac_critic_loss(const CriticPair& critics, const ParamTable& actor, const GroundTruthPair& pair,
                          const Prefix& trajectory, double tau, double lambda_var, const StepRewards& rewards) {
    const int ex = pair.example_id;
    return td_critic_loss(critics, pair, trajectory, lambda_var, rewards, [&](const Prefix& next) {
        const TokenDist pi = policy_dist(actor, ex, next);
        double boot = dot(pi.probs, critics.target.values(ex, next));
        boot += tau * entropy(pi.probs);
        return boot;
    });
}

LossGrad ac_critic_loss(const CriticPair& critics, const ParamTable& actor, const GroundTruthPair& pair,
                        const Prefix& trajectory, double lambda_var, const StepRewards& rewards) {
    const int ex = pair.example_id;
    return td_critic_loss(critics, pair, trajectory, lambda_var, rewards, [&](const Prefix& next) {
        return dot(policy_dist(actor, ex, next).probs, critics.target.values(ex, next));
    });
}

LossGrad erac_actor_loss(const ParamTable& actor, const ParamTable& critic, const GroundTruthPair& pair,
                         const Prefix& trajectory, double tau, double lambda_mle) {
    require_complete(trajectory);
    const int ex = pair.example_id;
    LossGrad out;
    Prefix s;
    for (Token a : trajectory.tokens) {
        const auto q = critic.values(ex, s);
        out.loss += add_expected_value(actor, ex, s, q, -1.0, out.grads);
        out.loss += add_entropy(actor, ex, s, -tau, out.grads);
        s = actor.space().transition(s, a);
    }
    if (lambda_mle != 0.0) {
        LossGrad mle = mle_loss(actor, pair);
        out.loss += lambda_mle * mle.loss;
        out.grads.merge(mle.grads, lambda_mle);
    }
    return out;
}

LossGrad ac_actor_loss(const ParamTable& actor, const ParamTable& critic, const GroundTruthPair& pair,
                       const Prefix& trajectory, double lambda_mle) {
    require_complete(trajectory);
    const int ex = pair.example_id;
    LossGrad out;
    Prefix s;
    for (Token a : trajectory.tokens) {
        out.loss += add_expected_value(actor, ex, s, critic.values(ex, s), -1.0, out.grads);
        s = actor.space().transition(s, a);
    }
    if (lambda_mle != 0.0) {
        LossGrad mle = mle_loss(actor, pair);
        out.loss += lambda_mle * mle.loss;
        out.grads.merge(mle.grads, lambda_mle);
    }
    return out;
}

void polyak_update(CriticPair& critics, double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw Error(ErrorKind::InvalidArgument, "beta must lie in (0, 1]");
    for (const auto& [key, online] : critics.online.rows()) {
        const bool missing = !critics.target.contains(key.example, key.prefix);
        auto& target = critics.target.row(key.example, key.prefix);
        if (missing) target = online;
        for (std::size_t i = 0; i < target.size(); ++i) target[i] = beta * online[i] + (1.0 - beta) * target[i];
    }
}

Prefix sample_trajectory(const ParamTable& actor, int example, Rng& rng) {
    const SeqSpace& space = actor.space();
    Prefix s;
    while (!s.terminated) {
        const TokenDist pi = policy_dist(actor, example, s);
        const double u = rng.uniform01();
        double acc = 0.0;
        std::size_t pick = pi.probs.size() - 1;
        for (std::size_t i = 0; i < pi.probs.size(); ++i) {
            acc += pi.probs[i];
            if (u < acc) {
                pick = i;
                break;
            }
        }
        s = space.transition(s, pi.tokens[pick]);
    }
    return s;
}

}  // namespace softseq
