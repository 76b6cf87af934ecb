#pragma once

#include "sigtrace/ids.hpp"
#include "sigtrace/value.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace sigtrace {

enum class Origin : std::uint8_t { Source, Derived };

std::string_view to_string(Origin origin) noexcept;

struct HistoryEntry {
    SignalId signal;
    VersionStamp stamp;
    Value value;
    WallTime wall_time = 0;
    ActionId action;
    Origin origin = Origin::Source;
    BranchId branch;

    bool operator==(const HistoryEntry&) const = default;
};

using Frontier = std::map<SignalId, VersionStamp>;

struct Checkpoint {
    CheckpointId id;
    std::string label;
    Frontier frontier;
    BranchId branch;
    WallTime created_at = 0;
    VersionStamp stamp;

    bool operator==(const Checkpoint&) const = default;
};

struct Branch {
    BranchId id;
    std::string label;
    std::optional<BranchId> parent;
    std::optional<CheckpointId> fork_point;
    // Parent entries at or below this stamp are shared with the branch.
    VersionStamp fork_stamp;
    WallTime created_at = 0;
};

struct ExplorationPath {
    PathId id;
    std::string label;
    VersionStamp stamp;
    WallTime created_at = 0;
    // Ordered by the stamp of the step operation; revisits allowed.
    std::map<VersionStamp, CheckpointId> steps;

    std::vector<CheckpointId> step_list() const;
};

struct SignalDiff {
    SignalId signal;
    std::optional<Value> before; // absent when the signal is missing at `a`
    std::optional<Value> after;

    bool operator==(const SignalDiff&) const = default;
};

/// Persistent history store.
///
/// The stamp-ordered global log is authoritative; the per-signal index
/// holds the stamps of each signal's entries in ascending order across
/// all branches. Entries are never mutated or removed. Remote entries
/// may land in the middle of a signal's index when their stamp is older
/// than local ones.
class History {
public:
    History();

    /// Inserts an entry. Returns false (and stores nothing) when the stamp
    /// is already present.
    bool insert(HistoryEntry entry);

    const HistoryEntry* find(VersionStamp stamp) const;
    const std::map<VersionStamp, HistoryEntry>& log() const { return log_; }
    std::size_t size() const { return log_.size(); }

    /// Entries of `signal` visible on `branch`, in stamp order.
    std::vector<const HistoryEntry*> entries_of(const SignalId& signal, BranchId branch) const;

    const HistoryEntry* latest(const SignalId& signal, BranchId branch) const;
    /// Latest visible entry with stamp <= at.
    const HistoryEntry* latest_at(const SignalId& signal, BranchId branch, VersionStamp at) const;
    /// Latest visible entry with stamp < before.
    const HistoryEntry* latest_before(const SignalId& signal, BranchId branch, VersionStamp before) const;
    /// Latest visible entry with wall_time <= at; wall-time ties break by stamp.
    const HistoryEntry* latest_at_time(const SignalId& signal, BranchId branch, WallTime at) const;

    bool visible(const HistoryEntry& entry, BranchId branch) const;

    // Branches. The main branch always exists.
    const Branch& branch(BranchId id) const;
    bool has_branch(BranchId id) const { return id.value < branches_.size(); }
    const std::vector<Branch>& branches() const { return branches_; }
    BranchId add_branch(std::string label, BranchId parent, CheckpointId fork_point, VersionStamp fork_stamp, WallTime at);

    // Checkpoints.
    void add_checkpoint(Checkpoint cp);
    const Checkpoint& checkpoint(CheckpointId id) const; // throws UnknownCheckpoint
    bool has_checkpoint(CheckpointId id) const { return checkpoints_.contains(id); }
    const std::map<CheckpointId, Checkpoint>& checkpoints() const { return checkpoints_; }
    std::vector<SignalDiff> diff(CheckpointId a, CheckpointId b) const;

    // Exploration paths.
    void add_path(ExplorationPath path);
    ExplorationPath& path(PathId id); // throws UnknownPath
    const ExplorationPath& path(PathId id) const;
    bool has_path(PathId id) const { return paths_.contains(id); }
    const std::map<PathId, ExplorationPath>& paths() const { return paths_; }

private:
    const std::vector<VersionStamp>* index_of(const SignalId& signal) const;

    std::map<VersionStamp, HistoryEntry> log_;
    std::unordered_map<SignalId, std::vector<VersionStamp>> index_;
    std::vector<Branch> branches_;
    std::map<CheckpointId, Checkpoint> checkpoints_;
    std::map<PathId, ExplorationPath> paths_;
};

} // namespace sigtrace
