#include "softseq/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace softseq {

double logsumexp(std::span<const double> x) {
    if (x.empty()) return -std::numeric_limits<double>::infinity();
    const double m = *std::max_element(x.begin(), x.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double xi : x) s += std::exp(xi - m);
    return m + std::log(s);
}

double soft_max_value(std::span<const double> x, double tau) {
    std::vector<double> scaled(x.begin(), x.end());
    for (double& v : scaled) v /= tau;
    return tau * logsumexp(scaled);
}

std::vector<double> softmax(std::span<const double> x, double tau) {
    std::vector<double> out(x.size());
    if (x.empty()) return out;
    const double m = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp((x[i] - m) / tau);
        s += out[i];
    }
    for (double& p : out) p /= s;
    return out;
}

double entropy(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

double cross_entropy(std::span<const double> p, std::span<const double> q) {
    double ce = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) ce -= p[i] * std::log(q[i]);
    return ce;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
    return kl;
}

}  // namespace softseq
