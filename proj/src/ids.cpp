#include "sigtrace/ids.hpp"

#include "sigtrace/error.hpp"

#include <charconv>

namespace sigtrace {

namespace {

template <typename T> T parse_number(std::string_view text, std::string_view what)
{
    T out {};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (text.empty() || ec != std::errc {} || ptr != text.data() + text.size() || (text.size() > 1 && text[0] == '0'))
        throw Error(ErrorCode::MalformedTrace, "invalid " + std::string(what) + " '" + std::string(text) + "'");
    return out;
}

// "<first><sep><second>" with both parts decimal.
template <typename A, typename B>
std::pair<A, B> parse_pair(std::string_view text, char sep, std::string_view what)
{
    auto pos = text.find(sep);
    if (pos == std::string_view::npos)
        throw Error(ErrorCode::MalformedTrace, "invalid " + std::string(what) + " '" + std::string(text) + "'");
    return {parse_number<A>(text.substr(0, pos), what), parse_number<B>(text.substr(pos + 1), what)};
}

// "<prefix><replica>.<counter>", e.g. "a0.12".
std::pair<ReplicaId, std::uint64_t> parse_prefixed(std::string_view text, char prefix, std::string_view what)
{
    if (text.empty() || text.front() != prefix)
        throw Error(ErrorCode::MalformedTrace, "invalid " + std::string(what) + " '" + std::string(text) + "'");
    return parse_pair<ReplicaId, std::uint64_t>(text.substr(1), '.', what);
}

std::string prefixed(char prefix, ReplicaId replica, std::uint64_t counter)
{
    return std::string(1, prefix) + std::to_string(replica) + "." + std::to_string(counter);
}

} // namespace

std::string VersionStamp::str() const { return std::to_string(lamport) + "@" + std::to_string(replica); }

VersionStamp VersionStamp::parse(std::string_view text)
{
    auto [l, r] = parse_pair<std::uint64_t, ReplicaId>(text, '@', "stamp");
    return VersionStamp {l, r};
}

std::string ActionId::str() const { return prefixed('a', replica, counter); }

ActionId ActionId::parse(std::string_view text)
{
    auto [r, c] = parse_prefixed(text, 'a', "action id");
    return ActionId {r, c};
}

std::string CheckpointId::str() const { return prefixed('c', replica, counter); }

CheckpointId CheckpointId::parse(std::string_view text)
{
    auto [r, c] = parse_prefixed(text, 'c', "checkpoint id");
    return CheckpointId {r, c};
}

std::string PathId::str() const { return prefixed('p', replica, counter); }

PathId PathId::parse(std::string_view text)
{
    auto [r, c] = parse_prefixed(text, 'p', "path id");
    return PathId {r, c};
}

std::string BranchId::str() const { return value == 0 ? "main" : "b" + std::to_string(value); }

BranchId BranchId::parse(std::string_view text)
{
    if (text == "main")
        return BranchId::main();
    if (text.size() < 2 || text.front() != 'b')
        throw Error(ErrorCode::MalformedTrace, "invalid branch id '" + std::string(text) + "'");
    return BranchId {parse_number<std::uint32_t>(text.substr(1), "branch id")};
}

std::string TxnId::str() const { return std::to_string(seq) + "@" + std::to_string(replica); }

TxnId TxnId::parse(std::string_view text)
{
    auto [s, r] = parse_pair<std::uint64_t, ReplicaId>(text, '@', "transaction id");
    return TxnId {r, s};
}

} // namespace sigtrace
