#include "softseq/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "softseq/error.hpp"

namespace softseq {

namespace {

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_number(std::string_view text, std::string_view key) {
    T value{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw Error(ErrorKind::ParseError, "bad value '" + std::string(text) + "' for " + std::string(key));
    return value;
}

using Setter = std::function<void(std::string_view)>;
using Getter = std::function<std::string()>;

struct Field {
    std::string key;
    Setter set;
    Getter get;
};

Field real(std::string key, double& x) {
    return {key, [&x, key](std::string_view v) { x = parse_number<double>(v, key); },
            [&x] { return format_double(x); }};
}

Field integer(std::string key, int& x) {
    return {key, [&x, key](std::string_view v) { x = parse_number<int>(v, key); },
            [&x] { return std::to_string(x); }};
}

Field unsigned64(std::string key, std::uint64_t& x) {
    return {key, [&x, key](std::string_view v) { x = parse_number<std::uint64_t>(v, key); },
            [&x] { return std::to_string(x); }};
}

std::vector<Field> phase_fields(PhaseSettings& p) {
    return {{"optimizer", [&p](std::string_view v) { p.optimizer.kind = parse_optimizer_kind(v); },
             [&p] { return std::string(to_string(p.optimizer.kind)); }},
            real("lr", p.optimizer.step_size),
            integer("epochs", p.epochs),
            real("beta1", p.optimizer.beta1),
            real("beta2", p.optimizer.beta2),
            real("epsilon", p.optimizer.epsilon)};
}

// Section name -> fields, in serialization order. The empty name is the top level.
std::vector<std::pair<std::string, std::vector<Field>>> schema(ExperimentConfig& c) {
    TrainerConfig& t = c.trainer;
    DatasetConfig& d = c.dataset;
    std::vector<Field> top = {
        {"format_version",
         [](std::string_view v) {
             if (parse_number<int>(v, "format_version") != kConfigVersion)
                 throw Error(ErrorKind::ParseError, "unsupported config format_version " + std::string(v));
         },
         [] { return std::to_string(kConfigVersion); }},
        {"gamma",
         [](std::string_view v) {
             if (parse_number<double>(v, "gamma") != 1.0)
                 throw Error(ErrorKind::ParseError, "gamma is fixed at 1 and cannot be configured");
         },
         [] { return std::string("1"); }},
        real("tau", t.tau),
        real("raml_tau", t.raml_tau),
        real("beta", t.beta),
        real("lambda_var", t.lambda_var),
        real("lambda_mle", t.lambda_mle),
        real("kappa", t.kappa),
        integer("num_samples", t.num_samples),
        integer("max_ngram", t.max_ngram),
        real("clip_norm", t.clip_norm),
        integer("lr_patience", t.lr_patience),
        unsigned64("seed", t.seed),
    };
    std::vector<Field> dataset = {
        integer("vocab_size", d.vocab_size),
        integer("horizon", d.horizon),
        integer("num_examples", d.num_examples),
        unsigned64("seed", d.seed),
        {"reward",
         [&d](std::string_view v) {
             d.reward = parse_reward_kind(v);
             if (d.reward == RewardKind::Tabulated)
                 throw Error(ErrorKind::ParseError, "tabulated rewards cannot be configured from a file");
         },
         [&d] { return std::string(to_string(d.reward)); }},
    };
    return {{"", std::move(top)},
            {"dataset", std::move(dataset)},
            {"pretrain-actor", phase_fields(t.pretrain_actor)},
            {"pretrain-critic", phase_fields(t.pretrain_critic)},
            {"joint", phase_fields(t.joint)},
            {"raml", phase_fields(t.raml)},
            {"vaml-critic", phase_fields(t.vaml_critic)},
            {"vaml-actor", phase_fields(t.vaml_actor)}};
}

void validate(const ExperimentConfig& c) {
    const TrainerConfig& t = c.trainer;
    auto require = [](bool ok, const char* what) {
        if (!ok) throw Error(ErrorKind::InvalidArgument, std::string("invalid config: ") + what);
    };
    require(t.tau >= 0.0, "tau must be >= 0");
    require(t.raml_tau > 0.0, "raml_tau must be > 0");
    require(t.beta > 0.0 && t.beta <= 1.0, "beta must lie in (0, 1]");
    require(t.lambda_var >= 0.0 && t.lambda_mle >= 0.0, "lambda weights must be >= 0");
    require(t.kappa >= 0.0 && t.kappa <= 1.0, "kappa must lie in [0, 1]");
    require(t.num_samples >= 1 && t.max_ngram >= 1, "num_samples and max_ngram must be >= 1");
    require(t.lr_patience >= 1, "lr_patience must be >= 1");
    for (const PhaseSettings* p : {&t.pretrain_actor, &t.pretrain_critic, &t.joint, &t.raml, &t.vaml_critic,
                                   &t.vaml_actor})
        require(p->epochs >= 0 && p->optimizer.step_size > 0.0, "phase epochs must be >= 0 and lr > 0");
    require(c.dataset.vocab_size >= 2 && c.dataset.horizon >= 2, "dataset needs vocab_size >= 2 and horizon >= 2");
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig config;
    auto sections = schema(config);
    std::size_t current = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = "config line " + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw Error(ErrorKind::ParseError, where + "unterminated section header");
            const std::string name(trim(line.substr(1, line.size() - 2)));
            current = sections.size();
            for (std::size_t i = 1; i < sections.size(); ++i)
                if (sections[i].first == name) current = i;
            if (current == sections.size()) throw Error(ErrorKind::ParseError, where + "unknown section [" + name + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw Error(ErrorKind::ParseError, where + "expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        bool found = false;
        for (auto& field : sections[current].second) {
            if (field.key != key) continue;
            try {
                field.set(value);
            } catch (const Error& e) {
                throw Error(ErrorKind::ParseError, where + e.what());
            }
            found = true;
        }
        if (!found) throw Error(ErrorKind::ParseError, where + "unknown key '" + key + "'");
    }
    validate(config);
    return config;
}

std::string serialize_config(const ExperimentConfig& config) {
    ExperimentConfig copy = config;
    std::string out = "# softseq experiment config\n";
    for (auto& [name, fields] : schema(copy)) {
        if (!name.empty()) out += "\n[" + name + "]\n";
        for (auto& f : fields) out += f.key + " = " + f.get() + "\n";
    }
    return out;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void save_config(const std::string& path, const ExperimentConfig& config) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write config file " + path);
    out << serialize_config(config);
}

Dataset make_dataset(const DatasetConfig& config) {
    Rng rng(config.seed);
    RewardSpec reward;
    reward.kind = config.reward;
    return make_copy_task(config.vocab_size, config.horizon, config.num_examples, rng, reward);
}

}  // namespace softseq
