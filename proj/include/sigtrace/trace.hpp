#pragma once

#include "sigtrace/history.hpp"
#include "sigtrace/ids.hpp"
#include "sigtrace/value.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sigtrace {

inline constexpr std::uint32_t kTraceFormatVersion = 1;
inline constexpr std::string_view kTraceFormatName = "sigtrace";

/// Position of an operation record inside a batch. `Close` marks the
/// last operation; propagation runs right after it.
enum class BatchMark : std::uint8_t { None, Open, Close };

namespace record {

struct DeclareSource {
    SignalId signal;
    VersionStamp stamp;
    Value value;
    ActionId action;
    bool implicit = false;
    BatchMark batch = BatchMark::None;
    WallTime wall_time = 0;
    bool operator==(const DeclareSource&) const = default;
};

struct DeclareDerived {
    SignalId signal;
    VersionStamp stamp;
    std::vector<SignalId> deps;
    std::string function;
    ActionId action;
    bool implicit = false;
    WallTime wall_time = 0;
    bool operator==(const DeclareDerived&) const = default;
};

struct Entry {
    SignalId signal;
    VersionStamp stamp;
    Value value;
    ActionId action;
    bool implicit = false;
    Origin origin = Origin::Source;
    BranchId branch;
    BatchMark batch = BatchMark::None;
    WallTime wall_time = 0;
    bool operator==(const Entry&) const = default;
};

struct ActionBegin {
    ActionId action;
    std::string label;
    std::string kind;
    std::optional<ActionId> parent;
    std::optional<ActionId> reverts;
    VersionStamp stamp;
    WallTime wall_time = 0;
    bool operator==(const ActionBegin&) const = default;
};

struct ActionEnd {
    ActionId action;
    std::string label;
    std::string kind;
    std::optional<ActionId> parent;
    std::optional<ActionId> reverts;
    bool implicit = false;
    ReplicaId origin = 0;
    VersionStamp opened;
    VersionStamp stamp; // close tick
    WallTime started_at = 0;
    std::uint64_t entries = 0;
    WallTime wall_time = 0;
    bool operator==(const ActionEnd&) const = default;
};

struct Checkpoint {
    CheckpointId checkpoint;
    std::string label;
    BranchId branch;
    VersionStamp stamp;
    Frontier frontier;
    ActionId action;
    bool implicit = false;
    WallTime wall_time = 0;
    bool operator==(const Checkpoint&) const = default;
};

struct Branch {
    enum class Kind : std::uint8_t { Fork, Checkout };
    Kind op = Kind::Fork;
    BranchId branch;
    std::string label; // fork only
    std::optional<BranchId> parent;
    std::optional<CheckpointId> checkpoint;
    WallTime wall_time = 0;
    bool operator==(const Branch&) const = default;
};

struct Path {
    enum class Kind : std::uint8_t { Create, Step };
    Kind op = Kind::Create;
    PathId path;
    std::string label; // create only
    std::optional<CheckpointId> checkpoint; // step only
    VersionStamp stamp;
    ActionId action;
    bool implicit = false;
    BatchMark batch = BatchMark::None;
    WallTime wall_time = 0;
    bool operator==(const Path&) const = default;
};

struct TxnCommit {
    TxnId txn;
    std::uint64_t lamport = 0;
    std::string label;
    std::uint64_t ops = 0;
    std::vector<std::uint8_t> bytes;
    WallTime wall_time = 0;
    bool operator==(const TxnCommit&) const = default;
};

enum class DeliverResult : std::uint8_t { Applied, Buffered, Duplicate };

struct TxnDeliver {
    TxnId txn;
    DeliverResult result = DeliverResult::Applied;
    std::vector<std::uint8_t> bytes;
    WallTime wall_time = 0;
    bool operator==(const TxnDeliver&) const = default;
};

} // namespace record

using TraceEvent = std::variant<record::DeclareSource, record::DeclareDerived, record::Entry, record::ActionBegin,
    record::ActionEnd, record::Checkpoint, record::Branch, record::Path, record::TxnCommit, record::TxnDeliver>;

std::string_view type_name(const TraceEvent& ev) noexcept;
std::optional<VersionStamp> stamp_of(const TraceEvent& ev) noexcept;
WallTime wall_time_of(const TraceEvent& ev) noexcept;
std::string_view to_string(record::DeliverResult r) noexcept;

struct TraceHeader {
    std::uint32_t version = kTraceFormatVersion;
    ReplicaId replica = 0;
    bool shared = false;
    bool operator==(const TraceHeader&) const = default;
};

struct Trace {
    TraceHeader header;
    std::vector<TraceEvent> events;
};

/// One canonical JSON object per line: sorted keys, no whitespace, and a
/// trailing "chk" field chaining each line's digest to the previous one.
/// The first line is always the header record.
std::string serialize_trace(const TraceHeader& header, std::span<const TraceEvent> events);

/// Canonical single-line form of one record, without the chain digest.
std::string serialize_event(const TraceEvent& ev);

/// Structural parse. Throws TraceError(MalformedTrace) with the failing
/// line, or TraceError(UnsupportedVersion) for a newer header. Does not
/// check the digest chain; see first_integrity_failure.
Trace parse_trace(std::string_view text);

/// 1-based line of the first record whose chain digest does not match,
/// or nullopt when the whole chain verifies.
std::optional<std::size_t> first_integrity_failure(std::string_view text);

void write_trace(const std::filesystem::path& path, const TraceHeader& header, std::span<const TraceEvent> events);
Trace read_trace(const std::filesystem::path& path); // IoFailure when unreadable
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view text);

} // namespace sigtrace
