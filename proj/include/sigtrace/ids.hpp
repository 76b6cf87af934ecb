#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace sigtrace {

using ReplicaId = std::uint32_t;

/// Wall-clock milliseconds since the epoch. Informational only; nothing
/// orders by it except value_at_time.
using WallTime = std::int64_t;

struct SignalId {
    std::string name;

    auto operator<=>(const SignalId&) const = default;
};

/// Logical version of a committed change, totally ordered by
/// (lamport, replica). Renders as "lamport@replica".
struct VersionStamp {
    std::uint64_t lamport = 0;
    ReplicaId replica = 0;

    auto operator<=>(const VersionStamp&) const = default;

    std::string str() const;
    static VersionStamp parse(std::string_view text);
};

// Per-replica counters; ordering within a replica follows the counter.
struct ActionId {
    ReplicaId replica = 0;
    std::uint64_t counter = 0;

    auto operator<=>(const ActionId&) const = default;

    std::string str() const;
    static ActionId parse(std::string_view text);
};

struct CheckpointId {
    ReplicaId replica = 0;
    std::uint64_t counter = 0;

    auto operator<=>(const CheckpointId&) const = default;

    std::string str() const;
    static CheckpointId parse(std::string_view text);
};

struct PathId {
    ReplicaId replica = 0;
    std::uint64_t counter = 0;

    auto operator<=>(const PathId&) const = default;

    std::string str() const;
    static PathId parse(std::string_view text);
};

/// Branches are replica-local. Branch 0 is the main branch.
struct BranchId {
    std::uint32_t value = 0;

    auto operator<=>(const BranchId&) const = default;

    static constexpr BranchId main() { return BranchId {0}; }
    std::string str() const;
    static BranchId parse(std::string_view text);
};

/// Replication unit id: the sender and its gapless sequence number.
struct TxnId {
    ReplicaId replica = 0;
    std::uint64_t seq = 0;

    auto operator<=>(const TxnId&) const = default;

    std::string str() const;
    static TxnId parse(std::string_view text);
};

} // namespace sigtrace

template <> struct std::hash<sigtrace::SignalId> {
    std::size_t operator()(const sigtrace::SignalId& id) const noexcept { return std::hash<std::string> {}(id.name); }
};
