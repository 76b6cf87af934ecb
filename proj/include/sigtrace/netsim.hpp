#pragma once

#include "sigtrace/ids.hpp"
#include "sigtrace/replica.hpp"
#include "sigtrace/value.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace sigtrace::sim {

/// Links between `isolated` and every other replica are cut for ticks
/// [start, end). Messages reaching a cut link wait until `end`.
struct Partition {
    std::uint64_t start = 0;
    std::uint64_t end = 0;
    std::vector<ReplicaId> isolated;
};

/// Replicas are numbered 1..replica_count.
struct SimConfig {
    std::size_t replica_count = 2;
    std::uint64_t seed = 0;
    std::uint64_t min_delay = 1;
    std::uint64_t max_delay = 3;
    double duplicate_prob = 0.0;
    // Without reordering every (from, to) channel is FIFO.
    bool reorder = true;
    std::vector<Partition> partitions;
    std::uint64_t max_ticks = 1'000'000;
    MergeFault fault = MergeFault::None;
};

// Throws Error(InvalidWorkload) on out-of-range settings.
void validate(const SimConfig& config);

namespace step {

struct CreateSource {
    std::string name;
    Value initial;
};
struct CreateDerived {
    std::string name;
    std::vector<SignalId> deps;
    std::string function;
};
struct Begin {
    std::string label;
    std::string kind;
};
struct End { };
struct Set {
    SignalId signal;
    Value value;
};
struct Batch {
    std::vector<Set> sets;
};
struct Undo { };
struct Redo { };
struct Checkpoint {
    std::string label;
};
// Creates a path and appends the most recent checkpoint, if any.
struct Path {
    std::string label;
};

} // namespace step

using Step = std::variant<step::CreateSource, step::CreateDerived, step::Begin, step::End, step::Set, step::Batch,
    step::Undo, step::Redo, step::Checkpoint, step::Path>;

/// Steps run in order on one replica at one tick. An action may span
/// several items of the same replica.
struct WorkItem {
    std::uint64_t tick = 0;
    ReplicaId replica = 1;
    std::vector<Step> steps;
};

struct Workload {
    std::vector<WorkItem> items;
};

/// Runs `steps` against one replica; `open` tracks the actions begun but
/// not yet ended. Library errors surface as Error(InvalidWorkload).
void execute(Replica& replica, const std::vector<Step>& steps, std::vector<ActionId>& open);

struct SimEvent {
    std::uint64_t deliver_at = 0;
    ReplicaId from = 0;
    ReplicaId to = 0;
    std::vector<std::uint8_t> payload;
    std::uint32_t copy_index = 0;
};

struct SimStats {
    std::uint64_t messages = 0; // scheduled copies, duplicates included
    std::uint64_t duplicates = 0;
    std::uint64_t deliveries = 0;
    std::uint64_t deferred = 0; // held back by a partition
    std::uint64_t transactions = 0;
    std::size_t max_buffer_depth = 0;
    std::uint64_t ticks = 0;
};

struct ReplicaReport {
    ReplicaId id = 0;
    std::string state; // Replica::replicated_state()
    std::string trace; // full trace text
    std::vector<SharedLogEntry> log;
    std::uint64_t top_level_actions = 0; // local top-level blocks committed
};

struct SimReport {
    SimConfig config;
    std::vector<ReplicaReport> replicas;
    SimStats stats;
    bool drained = true;

    /// Canonical JSON: config, stats, and per replica the replicated
    /// state, shared log and the digest of its trace.
    std::string to_json() const;
};

SimReport run(const SimConfig& config, const Workload& workload);

struct Convergence {
    bool converged = true;
    std::string divergence; // first difference, empty when converged
};

/// Compares every replica against the first. Throws Error(SimNotDrained)
/// when the run stopped with messages in flight.
Convergence assert_converged(const SimReport& report);

/// Tiny workload for exhaustive checking: `setup` runs on replica 1 and
/// is delivered everywhere first; then each replica runs its script
/// without seeing the others. Every transaction the scripts commit is
/// concurrent with those of the other replicas.
struct TinyWorkload {
    std::size_t replica_count = 2;
    std::vector<Step> setup;
    std::vector<std::vector<Step>> scripts; // index i runs on replica i + 1
};

struct ExhaustiveResult {
    bool ok = true;
    std::size_t transactions = 0;
    std::size_t schedules = 0; // delivery orders tried, summed over replicas
    std::string divergence;
};

inline constexpr std::size_t kMaxExhaustiveTransactions = 6;

/// Tries every causally legal delivery order of the scripts'
/// transactions on every replica plus a fresh observer and compares the
/// replicated states. Throws Error(TooManyTransactions) above six.
ExhaustiveResult exhaustive_delivery_check(const TinyWorkload& workload);

} // namespace sigtrace::sim
