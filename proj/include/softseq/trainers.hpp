#pragma once

#include <cstdint>
#include <map>

#include "softseq/models.hpp"
#include "softseq/reward.hpp"
#include "softseq/sampling.hpp"
#include "softseq/seq_space.hpp"

namespace softseq {

struct PhaseSettings {
    OptimizerSettings optimizer;
    int epochs = 10;

    bool operator==(const PhaseSettings&) const = default;
};

/// Hyper-parameters for every training procedure. Step sizes and weights are
/// the tuned machine-translation settings; epoch counts are desk-scale choices.
struct TrainerConfig {
    static constexpr double gamma = 1.0;  // fixed; the sequence MDP is undiscounted

    double tau = 0.05;          // entropy temperature; 0 selects plain actor-critic
    double raml_tau = 0.4;      // pay-off weight and token-target temperature for RAML/VAML
    double beta = 0.001;        // target-network interpolation rate
    double lambda_var = 0.001;  // critic smoothing weight
    double lambda_mle = 0.1;    // MLE mixing weight for the actor
    double kappa = 0.2;         // VAML token-target mixture
    int num_samples = 5;        // M
    int max_ngram = 4;
    double clip_norm = 5.0;
    int lr_patience = 1;
    std::uint64_t seed = 1;

    PhaseSettings pretrain_actor{{OptimizerKind::PlainGradient, 0.6}, 20};
    PhaseSettings pretrain_critic{{OptimizerKind::AdaptiveMoments, 0.001}, 20};
    PhaseSettings joint{{OptimizerKind::AdaptiveMoments, 0.0001}, 20};
    PhaseSettings raml{{OptimizerKind::PlainGradient, 0.6}, 20};
    PhaseSettings vaml_critic{{OptimizerKind::AdaptiveMoments, 0.001}, 20};
    PhaseSettings vaml_actor{{OptimizerKind::PlainGradient, 0.6}, 20};

    ProposalConfig proposal() const { return {max_ngram, num_samples, true}; }

    bool operator==(const TrainerConfig&) const = default;
};

/// Per-step rewards r(prefix, token) = R(prefix + token) - R(prefix), with an
/// optional per-(example, prefix) pay-off cache. Not thread-safe when caching.
class StepRewards {
public:
    StepRewards(SeqSpace space, RewardSpec spec, bool cache = true);

    const SeqSpace& space() const noexcept { return space_; }
    const RewardSpec& spec() const noexcept { return spec_; }

    double payoff(const GroundTruthPair& pair, const Prefix& y) const;
    double operator()(const GroundTruthPair& pair, const Prefix& prefix, Token token) const;

private:
    SeqSpace space_;
    RewardSpec spec_;
    bool cache_enabled_;
    mutable std::map<RowKey, double> cache_;
};

/// Online critic Q_phi and its slowly tracking target copy.
struct CriticPair {
    ParamTable online;
    ParamTable target;

    explicit CriticPair(const SeqSpace& space)
        : online(space, TableKind::QValues), target(space, TableKind::QValues) {}
};

/// -sum_t log pi(y*_t | y*_<t).
LossGrad mle_loss(const ParamTable& actor, const GroundTruthPair& pair);

/// -sum_i w_i log P_theta(y_i).
LossGrad raml_loss(const ParamTable& actor, const GroundTruthPair& pair, const WeightedBatch& batch);

/// Mean-squared soft Bellman residual along one trajectory:
///   sum_t [Q(y_<t, y_t) - r_t - tau * logsumexp(Q(y_<=t, .) / tau)]^2,
/// with the bootstrap dropped at the final (eos) step. Gradient flows through
/// both the prediction and the bootstrap.
LossGrad softq_loss(const ParamTable& critic, const GroundTruthPair& pair, const Prefix& trajectory, double tau,
                    const StepRewards& rewards);

/// sum_i w_i sum_t [kappa * CE(P_Q(.|y_<t), pi(.|y_<t)) - (1 - kappa) log pi(y_t|y_<t)],
/// where P_Q = softmax(Q / tau) of the frozen critic. Gradients w.r.t. the actor only.
LossGrad vaml_loss(const ParamTable& actor, const ParamTable& critic, const GroundTruthPair& pair,
                   const WeightedBatch& batch, double tau, double kappa);

/// TD loss against the target critic plus variance smoothing:
///   sum_t [Q(y_<t, y_t) - (r_t + tau H(pi(.|y_<=t)) + sum_w pi(w|y_<=t) Qbar(y_<=t, w))]^2
///   + lambda_var sum_t sum_w [Q(y_<t, w) - mean_w' Q(y_<t, w')]^2.
/// The target side is a constant; gradients w.r.t. the online critic only.
LossGrad erac_critic_loss(const CriticPair& critics, const ParamTable& actor, const GroundTruthPair& pair,
                          const Prefix& trajectory, double tau, double lambda_var, const StepRewards& rewards);

/// -[sum_t (sum_w pi(w|y_<t) Q(y_<t, w) + tau H(pi(.|y_<t))) + lambda_mle sum_t log pi(y*_t|y*_<t)],
/// critic values held constant.
LossGrad erac_actor_loss(const ParamTable& actor, const ParamTable& critic, const GroundTruthPair& pair,
                         const Prefix& trajectory, double tau, double lambda_mle);

/// Plain actor-critic losses without any entropy term; a separate code path so
/// the tau = 0 limit of the entropy-regularized losses can be checked against it.
LossGrad ac_critic_loss(const CriticPair& critics, const ParamTable& actor, const GroundTruthPair& pair,
                        const Prefix& trajectory, double lambda_var, const StepRewards& rewards);
LossGrad ac_actor_loss(const ParamTable& actor, const ParamTable& critic, const GroundTruthPair& pair,
                       const Prefix& trajectory, double lambda_mle);

/// target <- beta * online + (1 - beta) * target; target rows missing from the
/// target table start at the online values.
void polyak_update(CriticPair& critics, double beta);

/// Ancestral sample from pi(.|prefix) until eos (forced at the horizon).
Prefix sample_trajectory(const ParamTable& actor, int example, Rng& rng);

}  // namespace softseq
