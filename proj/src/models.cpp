#include "softseq/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "softseq/error.hpp"
#include "softseq/numeric.hpp"

namespace softseq {

namespace {

std::optional<Atom> g_atom_fault;

double fault_sign(Atom atom) { return g_atom_fault == atom ? -1.0 : 1.0; }

std::string format_value(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

void inject_atom_sign_fault(std::optional<Atom> atom) { g_atom_fault = atom; }
std::optional<Atom> injected_atom_sign_fault() { return g_atom_fault; }

std::string_view to_string(TableKind kind) {
    return kind == TableKind::PolicyLogits ? "policy-logits" : "q-values";
}

TableKind parse_table_kind(std::string_view text) {
    if (text == "policy-logits") return TableKind::PolicyLogits;
    if (text == "q-values") return TableKind::QValues;
    throw Error(ErrorKind::ParseError, "unknown table kind '" + std::string(text) + "'");
}

ParamTable::ParamTable(SeqSpace space, TableKind kind, double default_value)
    : space_(std::move(space)), kind_(kind), default_value_(default_value) {}

std::vector<double> ParamTable::values(int example, const Prefix& prefix) const {
    const auto it = rows_.find(RowKey{example, prefix});
    if (it != rows_.end()) return it->second;
    if (strict_)
        throw Error(ErrorKind::UnknownKey,
                    "no row for example " + std::to_string(example) + " prefix " + format_token_ids(prefix.tokens));
    return std::vector<double>(space_.allowed_tokens(prefix).size(), default_value_);
}

double ParamTable::value(int example, const Prefix& prefix, Token token) const {
    const auto allowed = space_.allowed_tokens(prefix);
    const auto pos = std::lower_bound(allowed.begin(), allowed.end(), token);
    if (pos == allowed.end() || *pos != token)
        throw Error(ErrorKind::ForbiddenToken, "token " + std::to_string(token) + " not allowed here");
    return values(example, prefix)[static_cast<std::size_t>(pos - allowed.begin())];
}

std::vector<double>& ParamTable::row(int example, const Prefix& prefix) {
    auto [it, inserted] = rows_.try_emplace(RowKey{example, prefix});
    if (inserted) it->second.assign(space_.allowed_tokens(prefix).size(), default_value_);
    return it->second;
}

void ParamTable::set(int example, const Prefix& prefix, Token token, double v) {
    const auto allowed = space_.allowed_tokens(prefix);
    const auto pos = std::lower_bound(allowed.begin(), allowed.end(), token);
    if (pos == allowed.end() || *pos != token)
        throw Error(ErrorKind::ForbiddenToken, "token " + std::to_string(token) + " not allowed here");
    row(example, prefix)[static_cast<std::size_t>(pos - allowed.begin())] = v;
}

bool ParamTable::contains(int example, const Prefix& prefix) const {
    return rows_.contains(RowKey{example, prefix});
}

std::size_t ParamTable::num_parameters() const {
    std::size_t n = 0;
    for (const auto& [_, r] : rows_) n += r.size();
    return n;
}

std::vector<double>& GradAccumulator::row(int example, const Prefix& prefix, std::size_t width) {
    auto [it, inserted] = rows_.try_emplace(RowKey{example, prefix});
    if (inserted) it->second.assign(width, 0.0);
    return it->second;
}

void GradAccumulator::add(int example, const Prefix& prefix, std::size_t width, std::size_t index, double g) {
    row(example, prefix, width)[index] += g;
}

void GradAccumulator::merge(const GradAccumulator& other, double weight) {
    for (const auto& [key, r] : other.rows_) {
        auto& mine = row(key.example, key.prefix, r.size());
        for (std::size_t i = 0; i < r.size(); ++i) mine[i] += weight * r[i];
    }
}

void GradAccumulator::scale(double factor) {
    for (auto& [_, r] : rows_)
        for (double& g : r) g *= factor;
}

double GradAccumulator::norm() const {
    double s = 0.0;
    for (const auto& [_, r] : rows_)
        for (double g : r) s += g * g;
    return std::sqrt(s);
}

bool GradAccumulator::all_finite() const {
    for (const auto& [_, r] : rows_)
        for (double g : r)
            if (!std::isfinite(g)) return false;
    return true;
}

TokenDist policy_dist(const ParamTable& actor, int example, const Prefix& prefix) {
    if (prefix.terminated) throw Error(ErrorKind::AlreadyTerminated, "no policy after eos");
    return {actor.space().allowed_tokens(prefix), softmax(actor.values(example, prefix))};
}

double add_neg_log_prob(const ParamTable& actor, int example, const Prefix& prefix, Token token, double weight,
                        GradAccumulator& grads) {
    const TokenDist pi = policy_dist(actor, example, prefix);
    const auto pos = std::lower_bound(pi.tokens.begin(), pi.tokens.end(), token);
    if (pos == pi.tokens.end() || *pos != token)
        throw Error(ErrorKind::ForbiddenToken, "token " + std::to_string(token) + " not allowed here");
    const std::size_t k = static_cast<std::size_t>(pos - pi.tokens.begin());
    const double sign = fault_sign(Atom::NegLogProb);
    auto& g = grads.row(example, prefix, pi.tokens.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * weight * (pi.probs[i] - (i == k ? 1.0 : 0.0));
    // log-softmax directly keeps the value accurate when pi(token) underflows.
    const auto logits = actor.values(example, prefix);
    return weight * (logsumexp(logits) - logits[k]);
}

double add_expected_value(const ParamTable& actor, int example, const Prefix& prefix, std::span<const double> costs,
                          double weight, GradAccumulator& grads) {
    const TokenDist pi = policy_dist(actor, example, prefix);
    if (costs.size() != pi.probs.size()) throw Error(ErrorKind::InvalidArgument, "cost vector width mismatch");
    double mean = 0.0;
    for (std::size_t i = 0; i < costs.size(); ++i) mean += pi.probs[i] * costs[i];
    const double sign = fault_sign(Atom::ExpectedValue);
    auto& g = grads.row(example, prefix, pi.tokens.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * weight * pi.probs[i] * (costs[i] - mean);
    return weight * mean;
}

double add_entropy(const ParamTable& actor, int example, const Prefix& prefix, double weight, GradAccumulator& grads) {
    const TokenDist pi = policy_dist(actor, example, prefix);
    const double h = entropy(pi.probs);
    const double sign = fault_sign(Atom::Entropy);
    auto& g = grads.row(example, prefix, pi.tokens.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double log_p = pi.probs[i] > 0.0 ? std::log(pi.probs[i]) : 0.0;
        g[i] += sign * weight * (-pi.probs[i] * (log_p + h));
    }
    return weight * h;
}

double add_cross_entropy(const ParamTable& actor, int example, const Prefix& prefix, std::span<const double> target,
                         double weight, GradAccumulator& grads) {
    const auto logits = actor.values(example, prefix);
    if (target.size() != logits.size()) throw Error(ErrorKind::InvalidArgument, "target width mismatch");
    const auto pi = softmax(logits);
    const double lse = logsumexp(logits);
    double mass = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        mass += target[i];
        if (target[i] != 0.0) loss += target[i] * (lse - logits[i]);
    }
    const double sign = fault_sign(Atom::CrossEntropy);
    auto& g = grads.row(example, prefix, logits.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * weight * (mass * pi[i] - target[i]);
    return weight * loss;
}

GradCheckReport fd_gradcheck(const LossFn& loss, ParamTable table, double epsilon) {
    const LossGrad analytic = loss(table);
    if (!std::isfinite(analytic.loss)) throw Error(ErrorKind::NonFiniteLoss, "loss is not finite at the check point");
    for (const auto& [key, _] : analytic.grads.rows()) table.row(key.example, key.prefix);

    GradCheckReport report;
    std::vector<RowKey> keys;
    for (const auto& [key, _] : table.rows()) keys.push_back(key);
    for (const RowKey& key : keys) {
        const std::size_t width = table.rows().at(key).size();
        const auto g_it = analytic.grads.rows().find(key);
        for (std::size_t i = 0; i < width; ++i) {
            double& x = table.mutable_rows().at(key)[i];
            const double saved = x;
            x = saved + epsilon;
            const double up = loss(table).loss;
            x = saved - epsilon;
            const double down = loss(table).loss;
            x = saved;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw Error(ErrorKind::NonFiniteLoss, "loss is not finite near the check point");
            const double fd = (up - down) / (2.0 * epsilon);
            const double a = g_it == analytic.grads.rows().end() ? 0.0 : g_it->second[i];
            const double rel = std::abs(a - fd) / std::max(1e-8, std::abs(a) + std::abs(fd));
            report.max_rel_error = std::max(report.max_rel_error, rel);
            ++report.parameters;
        }
    }
    return report;
}

double clip_global_norm(GradAccumulator& grads, double max_norm) {
    const double n = grads.norm();
    if (max_norm > 0.0 && n > max_norm) grads.scale(max_norm / n);
    return n;
}

std::string_view to_string(OptimizerKind kind) {
    return kind == OptimizerKind::PlainGradient ? "sgd" : "adam";
}

OptimizerKind parse_optimizer_kind(std::string_view text) {
    if (text == "sgd" || text == "plain-gradient") return OptimizerKind::PlainGradient;
    if (text == "adam" || text == "adaptive-moments") return OptimizerKind::AdaptiveMoments;
    throw Error(ErrorKind::ParseError, "unknown optimizer '" + std::string(text) + "'");
}

Optimizer::Optimizer(OptimizerSettings settings) : settings_(settings) {
    if (!(settings_.step_size > 0.0)) throw Error(ErrorKind::InvalidArgument, "step size must be positive");
}

void Optimizer::step(ParamTable& table, const GradAccumulator& grads) {
    if (!grads.all_finite()) throw Error(ErrorKind::NonFiniteGradient, "gradient contains non-finite entries");
    const double lr = settings_.step_size;
    for (const auto& [key, g] : grads.rows()) {
        auto& params = table.row(key.example, key.prefix);
        if (settings_.kind == OptimizerKind::PlainGradient) {
            for (std::size_t i = 0; i < g.size(); ++i) params[i] -= lr * g[i];
            continue;
        }
        auto [it, inserted] = moments_.try_emplace(key);
        Moments& m = it->second;
        if (inserted) {
            m.first.assign(g.size(), 0.0);
            m.second.assign(g.size(), 0.0);
        }
        ++m.steps;
        const double c1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(m.steps));
        const double c2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(m.steps));
        for (std::size_t i = 0; i < g.size(); ++i) {
            m.first[i] = settings_.beta1 * m.first[i] + (1.0 - settings_.beta1) * g[i];
            m.second[i] = settings_.beta2 * m.second[i] + (1.0 - settings_.beta2) * g[i] * g[i];
            const double m_hat = m.first[i] / c1;
            const double v_hat = m.second[i] / c2;
            params[i] -= lr * m_hat / (std::sqrt(v_hat) + settings_.epsilon);
        }
    }
}

void write_checkpoint(std::ostream& out, const ParamTable& table) {
    const SeqSpace& s = table.space();
    out << "# softseq-checkpoint format_version=" << kCheckpointVersion << " kind=" << to_string(table.kind())
        << " vocab=" << s.vocab().size() << " eos=" << s.vocab().eos() << " horizon=" << s.horizon()
        << " default=" << format_value(table.default_value()) << '\n';
    for (const auto& [key, r] : table.rows()) {
        const auto allowed = s.allowed_tokens(key.prefix);
        for (std::size_t i = 0; i < r.size(); ++i)
            out << "P " << key.example << ' ' << format_token_ids(key.prefix.tokens) << ' ' << allowed[i] << ' '
                << format_value(r[i]) << '\n';
    }
}

namespace {

std::map<std::string, std::string> parse_header_fields(const std::string& line) {
    std::istringstream in(line);
    std::string word;
    in >> word;
    if (word != "#") throw Error(ErrorKind::ParseError, "missing header line");
    in >> word;
    std::map<std::string, std::string> fields;
    fields["magic"] = word;
    while (in >> word) {
        const auto eq = word.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::ParseError, "bad header field '" + word + "'");
        fields[word.substr(0, eq)] = word.substr(eq + 1);
    }
    return fields;
}

}  // namespace

ParamTable read_checkpoint(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "empty checkpoint");
    auto fields = parse_header_fields(line);
    if (fields["magic"] != "softseq-checkpoint") throw Error(ErrorKind::ParseError, "not a checkpoint file");
    if (fields["format_version"] != std::to_string(kCheckpointVersion))
        throw Error(ErrorKind::ParseError, "unsupported checkpoint version '" + fields["format_version"] + "'");
    try {
        const SeqSpace space(Vocab(std::stoi(fields.at("vocab")), std::stoi(fields.at("eos"))),
                             std::stoi(fields.at("horizon")));
        ParamTable table(space, parse_table_kind(fields.at("kind")), std::strtod(fields.at("default").c_str(), nullptr));
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream row(line);
            std::string tag, prefix_text, value_text;
            int example = 0;
            Token token = 0;
            if (!(row >> tag >> example >> prefix_text >> token >> value_text) || tag != "P")
                throw Error(ErrorKind::ParseError, "bad checkpoint record '" + line + "'");
            table.set(example, space.make(parse_token_ids(prefix_text)), token, std::strtod(value_text.c_str(), nullptr));
        }
        return table;
    } catch (const std::out_of_range&) {
        throw Error(ErrorKind::ParseError, "checkpoint header is missing a field");
    } catch (const std::invalid_argument&) {
        throw Error(ErrorKind::ParseError, "checkpoint header has a malformed number");
    }
}

void load_values(ParamTable& critic, int example, const std::map<Prefix, ActionValues>& values) {
    for (const auto& [p, av] : values) critic.row(example, p) = av.values;
}

}  // namespace softseq
