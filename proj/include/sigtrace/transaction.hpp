#pragma once

#include "sigtrace/history.hpp"
#include "sigtrace/ids.hpp"
#include "sigtrace/value.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sigtrace {

/// Causal context: per replica, the last delivered transaction sequence number.
using VectorClock = std::map<ReplicaId, std::uint64_t>;

namespace op {

struct DeclareSource {
    SignalId signal;
    Value initial;
    bool operator==(const DeclareSource&) const = default;
};

struct DeclareDerived {
    SignalId signal;
    std::vector<SignalId> deps;
    std::string function;
    bool operator==(const DeclareDerived&) const = default;
};

struct SetValue {
    SignalId signal;
    Value value;
    bool operator==(const SetValue&) const = default;
};

struct DeclareCheckpoint {
    CheckpointId id;
    std::string label;
    Frontier frontier;
    bool operator==(const DeclareCheckpoint&) const = default;
};

struct CreatePath {
    PathId id;
    std::string label;
    bool operator==(const CreatePath&) const = default;
};

struct AppendStep {
    PathId path;
    CheckpointId checkpoint;
    bool operator==(const AppendStep&) const = default;
};

} // namespace op

/// One replicated operation. `action` is the innermost block the op was
/// recorded under on its origin replica. Derived values never travel.
struct Op {
    VersionStamp stamp;
    ActionId action;
    WallTime wall_time = 0;
    std::variant<op::DeclareSource, op::DeclareDerived, op::SetValue, op::DeclareCheckpoint, op::CreatePath, op::AppendStep> body;

    bool operator==(const Op&) const = default;
};

/// Semantic action carried with a transaction; nested blocks travel as children.
struct ActionDescriptor {
    ActionId id;
    std::string label;
    std::string kind;
    bool implicit = false;
    std::optional<ActionId> reverts;
    WallTime started_at = 0;
    WallTime ended_at = 0;
    VersionStamp opened;
    VersionStamp closed;
    std::vector<ActionDescriptor> children;

    bool operator==(const ActionDescriptor&) const = default;
};

/// Replication unit: one closed top-level action.
struct Transaction {
    TxnId id;
    std::uint64_t lamport = 0;
    VectorClock deps; // sender's delivered state at emission, sender excluded
    std::vector<Op> ops;
    ActionDescriptor action;

    bool operator==(const Transaction&) const = default;
};

inline constexpr std::uint8_t kTransactionFormatVersion = 1;

/// Canonical binary encoding. Layout (all integers unsigned LEB128
/// unless noted, signed ones zigzag-encoded first):
///
///   u8 version (=1)
///   replica, seq, lamport
///   n_deps, then (replica, seq) pairs in ascending replica order
///   descriptor: action(replica, counter), label, kind, u8 flags
///     (bit0 implicit, bit1 has reverts), [reverts], started_at(z),
///     ended_at(z), opened(lamport, replica), closed(lamport, replica),
///     n_children, children...
///   n_ops, then per op: u8 tag, stamp(lamport, replica),
///     action(replica, counter), wall_time(z), tag-specific payload
///
/// Strings are length-prefixed UTF-8. Values are a tag byte (the
/// Value::Kind index) followed by: nothing (null), u8 (bool), zigzag
/// varint (int), 8 little-endian bytes of the IEEE-754 pattern (float),
/// string, or a count followed by items / key-value pairs in key order.
std::vector<std::uint8_t> encode(const Transaction& txn);

/// Throws Error(MalformedTransaction) on truncated, trailing, or
/// otherwise invalid bytes.
Transaction decode(std::span<const std::uint8_t> bytes);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(std::string_view hex); // throws MalformedTransaction

} // namespace sigtrace
