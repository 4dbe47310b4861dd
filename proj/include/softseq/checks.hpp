#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "softseq/oracle.hpp"
#include "softseq/reward.hpp"
#include "softseq/seq_space.hpp"

namespace softseq {

/// Outcome of one numerical property check. `measured` is the worst observed
/// deviation and `tolerance` the bound it was held to.
struct CheckResult {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

/// Randomized oracle instance: random vocab, horizon, temperature, reference
/// and i.i.d. uniform[0,1] sequence rewards.
struct OracleInstance {
    SeqSpace space;
    GroundTruthPair ref;
    double tau;
    RewardSpec spec;
};

std::vector<OracleInstance> randomized_oracle_instances(int count, std::uint64_t seed);

CheckResult check_marginal_match(const std::vector<OracleInstance>& instances);
CheckResult check_terminal_condition(const std::vector<OracleInstance>& instances);
CheckResult check_oracle_equivalence(const std::vector<OracleInstance>& instances);
CheckResult check_softq_convergence();
CheckResult check_policy_evaluation_fixed_point();
CheckResult check_policy_gradient_theorem();
CheckResult check_ce_decomposition();
CheckResult check_raml_consistency();
CheckResult check_gradients();

/// Structural invariants of every module that the numbered checks above do not
/// already exercise.
std::vector<CheckResult> check_module_invariants();

/// Injects a sign error into each gradient atom in turn and requires
/// check_gradients to fail every time.
CheckResult check_mutation_smoke();

/// Everything above, in order.
std::vector<CheckResult> run_check_suite();

std::string format_check(const CheckResult& result);

}  // namespace softseq
