#pragma once

#include <span>
#include <vector>

namespace softseq {

/// log(sum(exp(x))) with the max subtracted first. Empty input gives -inf.
double logsumexp(std::span<const double> x);

/// tau * logsumexp(x / tau).
double soft_max_value(std::span<const double> x, double tau);

/// softmax(x / tau); tau defaults to plain softmax.
std::vector<double> softmax(std::span<const double> x, double tau = 1.0);

/// -sum p log p with 0 log 0 = 0.
double entropy(std::span<const double> probs);

/// -sum p log q; terms with p == 0 are skipped.
double cross_entropy(std::span<const double> p, std::span<const double> q);

/// KL(p || q); terms with p == 0 are skipped.
double kl_divergence(std::span<const double> p, std::span<const double> q);

}  // namespace softseq
