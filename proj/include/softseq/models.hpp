#pragma once

#include <compare>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "softseq/oracle.hpp"
#include "softseq/seq_space.hpp"

namespace softseq {

enum class TableKind { PolicyLogits, QValues };

std::string_view to_string(TableKind kind);
TableKind parse_table_kind(std::string_view text);

struct RowKey {
    int example = 0;
    Prefix prefix;

    auto operator<=>(const RowKey&) const = default;
    bool operator==(const RowKey&) const = default;
};

/// Tabular parameters keyed by (example, prefix), one entry per allowed token.
///
/// Policy tables hold logits of pi(.|prefix); critic tables hold Q(prefix, w).
/// Rows are created lazily at `default_value`; reads of a missing row see the
/// default unless the table is strict.
class ParamTable {
public:
    using Rows = std::map<RowKey, std::vector<double>>;

    ParamTable(SeqSpace space, TableKind kind, double default_value = 0.0);

    const SeqSpace& space() const noexcept { return space_; }
    TableKind kind() const noexcept { return kind_; }
    double default_value() const noexcept { return default_value_; }

    void set_strict(bool strict) noexcept { strict_ = strict; }
    bool strict() const noexcept { return strict_; }

    /// Row aligned with allowed_tokens(prefix).
    std::vector<double> values(int example, const Prefix& prefix) const;
    double value(int example, const Prefix& prefix, Token token) const;

    std::vector<double>& row(int example, const Prefix& prefix);
    void set(int example, const Prefix& prefix, Token token, double value);
    bool contains(int example, const Prefix& prefix) const;

    const Rows& rows() const noexcept { return rows_; }
    Rows& mutable_rows() noexcept { return rows_; }
    std::size_t num_parameters() const;

    bool operator==(const ParamTable&) const = default;

private:
    SeqSpace space_;
    TableKind kind_;
    double default_value_;
    bool strict_ = false;
    Rows rows_;
};

/// Gradients over the same key space as a ParamTable.
class GradAccumulator {
public:
    using Rows = std::map<RowKey, std::vector<double>>;

    std::vector<double>& row(int example, const Prefix& prefix, std::size_t width);
    void add(int example, const Prefix& prefix, std::size_t width, std::size_t index, double g);
    void merge(const GradAccumulator& other, double weight = 1.0);
    void scale(double factor);
    double norm() const;
    bool all_finite() const;

    const Rows& rows() const noexcept { return rows_; }
    bool empty() const noexcept { return rows_.empty(); }

private:
    Rows rows_;
};

/// softmax of the logits over allowed_tokens(prefix).
TokenDist policy_dist(const ParamTable& actor, int example, const Prefix& prefix);

/// Loss atoms on a policy table. Each returns weight * atom value and adds
/// weight * d(atom)/d(logits) to `grads`.
///   (i)   -log pi(token|prefix)
///   (ii)  sum_w pi(w|prefix) * costs[w]       (costs aligned with allowed tokens)
///   (iii) H(pi(.|prefix))
/// cross_entropy is sum_w target[w] * (i)(w), kept as one call for speed.
double add_neg_log_prob(const ParamTable& actor, int example, const Prefix& prefix, Token token, double weight,
                        GradAccumulator& grads);
double add_expected_value(const ParamTable& actor, int example, const Prefix& prefix, std::span<const double> costs,
                          double weight, GradAccumulator& grads);
double add_entropy(const ParamTable& actor, int example, const Prefix& prefix, double weight, GradAccumulator& grads);
double add_cross_entropy(const ParamTable& actor, int example, const Prefix& prefix, std::span<const double> target,
                         double weight, GradAccumulator& grads);

enum class Atom { NegLogProb, ExpectedValue, Entropy, CrossEntropy };

/// Mutation hook for the verification suite: flips the sign of one atom's
/// gradient so that gradient checks can be shown to catch it. Process-wide.
void inject_atom_sign_fault(std::optional<Atom> atom);
std::optional<Atom> injected_atom_sign_fault();

struct LossGrad {
    double loss = 0.0;
    GradAccumulator grads;
};

using LossFn = std::function<LossGrad(const ParamTable&)>;

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t parameters = 0;
};

/// Central differences (L(x+eps) - L(x-eps)) / 2eps against the analytic
/// gradient of `loss`, for every parameter of `table` and every key the
/// analytic gradient touches. Relative error is |a-f| / max(1e-8, |a|+|f|).
GradCheckReport fd_gradcheck(const LossFn& loss, ParamTable table, double epsilon = 1e-5);

/// Scales grads down to `max_norm` if needed; returns the norm before clipping.
double clip_global_norm(GradAccumulator& grads, double max_norm);

enum class OptimizerKind { PlainGradient, AdaptiveMoments };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view text);

struct OptimizerSettings {
    OptimizerKind kind = OptimizerKind::PlainGradient;
    double step_size = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    bool operator==(const OptimizerSettings&) const = default;
};

/// Gradient-descent step on a ParamTable. Adaptive moments are kept per row and
/// only rows present in the gradient are touched; bias correction uses each
/// row's own update count.
class Optimizer {
public:
    explicit Optimizer(OptimizerSettings settings = {});

    void step(ParamTable& table, const GradAccumulator& grads);

    const OptimizerSettings& settings() const noexcept { return settings_; }
    double step_size() const noexcept { return settings_.step_size; }
    void set_step_size(double s) noexcept { settings_.step_size = s; }

private:
    struct Moments {
        std::vector<double> first;
        std::vector<double> second;
        long steps = 0;
    };

    OptimizerSettings settings_;
    std::map<RowKey, Moments> moments_;
};

inline constexpr int kCheckpointVersion = 1;

/// Header line then "P <example> <prefix> <token> <value>" per entry.
void write_checkpoint(std::ostream& out, const ParamTable& table);
ParamTable read_checkpoint(std::istream& in);

/// Copies oracle or policy-evaluation values into a critic table for one example.
void load_values(ParamTable& critic, int example, const std::map<Prefix, ActionValues>& values);

}  // namespace softseq
