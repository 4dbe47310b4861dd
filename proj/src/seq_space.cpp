#include "softseq/seq_space.hpp"

#include <charconv>

#include "softseq/error.hpp"

namespace softseq {

Vocab::Vocab(int size) : Vocab(size, size - 1) {}

Vocab::Vocab(int size, Token eos) : size_(size), eos_(eos) {
    if (size < 1) throw Error(ErrorKind::InvalidArgument, "vocabulary needs at least the eos token");
    if (eos < 0 || eos >= size) throw Error(ErrorKind::InvalidArgument, "eos id outside the vocabulary");
}

std::vector<Token> Vocab::all_tokens() const {
    std::vector<Token> out(static_cast<std::size_t>(size_));
    for (int i = 0; i < size_; ++i) out[static_cast<std::size_t>(i)] = i;
    return out;
}

std::vector<Token> Vocab::content_tokens() const {
    std::vector<Token> out;
    out.reserve(static_cast<std::size_t>(size_ - 1));
    for (int i = 0; i < size_; ++i)
        if (i != eos_) out.push_back(i);
    return out;
}

std::vector<Token> Prefix::content() const {
    if (!terminated) return tokens;
    return {tokens.begin(), tokens.end() - 1};
}

std::string format_token_ids(const std::vector<Token>& tokens) {
    if (tokens.empty()) return "-";
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(tokens[i]);
    }
    return out;
}

std::vector<Token> parse_token_ids(std::string_view text) {
    std::vector<Token> out;
    if (text == "-") return out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = text.find(',', pos);
        const std::string_view item = text.substr(pos, comma == std::string_view::npos ? text.size() - pos : comma - pos);
        Token value = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
        if (ec != std::errc{} || ptr != item.data() + item.size() || item.empty())
            throw Error(ErrorKind::ParseError, "bad token id list '" + std::string(text) + "'");
        out.push_back(value);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

SeqSpace::SeqSpace(Vocab vocab, int horizon, std::uint64_t enumeration_budget)
    : vocab_(vocab), horizon_(horizon), budget_(enumeration_budget) {
    if (horizon < 1) throw Error(ErrorKind::InvalidArgument, "horizon must be at least 1");
}

Prefix SeqSpace::make(std::vector<Token> tokens) const {
    Prefix p;
    for (Token t : tokens) p = transition(p, t);
    return p;
}

std::vector<Token> SeqSpace::allowed_tokens(const Prefix& prefix) const {
    if (prefix.terminated) throw Error(ErrorKind::AlreadyTerminated, "terminated sequence has no successors");
    if (static_cast<int>(prefix.size()) >= horizon_)
        throw Error(ErrorKind::HorizonExceeded, "prefix length reached the horizon");
    if (static_cast<int>(prefix.size()) == horizon_ - 1) return {vocab_.eos()};
    return vocab_.all_tokens();
}

bool SeqSpace::is_allowed(const Prefix& prefix, Token token) const {
    if (prefix.terminated || static_cast<int>(prefix.size()) >= horizon_ || !vocab_.contains(token)) return false;
    return static_cast<int>(prefix.size()) < horizon_ - 1 || token == vocab_.eos();
}

Prefix SeqSpace::transition(const Prefix& prefix, Token token) const {
    if (prefix.terminated) throw Error(ErrorKind::AlreadyTerminated, "cannot extend a terminated sequence");
    if (static_cast<int>(prefix.size()) >= horizon_)
        throw Error(ErrorKind::HorizonExceeded, "prefix length reached the horizon");
    if (!is_allowed(prefix, token))
        throw Error(ErrorKind::ForbiddenToken, "token " + std::to_string(token) + " not allowed after " +
                                                   format_token_ids(prefix.tokens));
    Prefix next = prefix;
    next.tokens.push_back(token);
    next.terminated = token == vocab_.eos();
    return next;
}

void SeqSpace::check_budget() const {
    std::uint64_t count = 1;
    for (int i = 0; i < horizon_; ++i) {
        count *= static_cast<std::uint64_t>(vocab_.size());
        if (count > budget_)
            throw Error(ErrorKind::EnumerationBudgetExceeded,
                        "|W|^T exceeds the enumeration budget of " + std::to_string(budget_));
    }
}

std::vector<Prefix> SeqSpace::enumerate_prefixes() const {
    check_budget();
    std::vector<Prefix> out{Prefix{}};
    for (std::size_t head = 0; head < out.size(); ++head) {
        if (static_cast<int>(out[head].size()) >= horizon_ - 1) continue;
        for (Token t : vocab_.content_tokens()) out.push_back(transition(out[head], t));
    }
    return out;
}

std::vector<Prefix> SeqSpace::enumerate_complete() const {
    std::vector<Prefix> out;
    for (const Prefix& p : enumerate_prefixes()) out.push_back(transition(p, vocab_.eos()));
    return out;
}

}  // namespace softseq
