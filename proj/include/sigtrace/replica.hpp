#pragma once

#include "sigtrace/actions.hpp"
#include "sigtrace/functions.hpp"
#include "sigtrace/history.hpp"
#include "sigtrace/ids.hpp"
#include "sigtrace/signal_graph.hpp"
#include "sigtrace/trace.hpp"
#include "sigtrace/transaction.hpp"
#include "sigtrace/value.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sigtrace {

using WallClock = std::function<WallTime()>;

/// Milliseconds since the epoch from the system clock.
WallTime system_wall_time();

enum class MergeFault : std::uint8_t {
    None,
    // Test fixture: keep the smaller stamp on remote LWW conflicts.
    InvertLastWriterWins,
};

struct ReplicaOptions {
    ReplicaId id = 0;
    bool shared = false;
    WallClock clock = system_wall_time;
    FunctionRegistry functions = FunctionRegistry::with_builtins();
    MergeFault merge_fault = MergeFault::None;
};

enum class ApplyResult : std::uint8_t { Applied, Buffered, Duplicate };

struct SharedLogEntry {
    TxnId txn;
    VersionStamp order; // (txn lamport, sender)
    ActionDescriptor action;
};

namespace detail {
class Replayer;
}

/// One collaborator's document: reactive signals with persistent
/// histories, semantic action blocks, coarse-scale trace structure and,
/// in shared mode, the replication endpoint.
///
/// Single-threaded: every call must come from the owning thread. Every
/// mutating call appends the trace records it produces to events().
class Replica {
public:
    explicit Replica(ReplicaOptions options = {});

    Replica(Replica&&) noexcept = default;
    Replica& operator=(Replica&&) noexcept = default;
    Replica(const Replica&) = delete;
    Replica& operator=(const Replica&) = delete;

    ReplicaId id() const noexcept { return options_.id; }
    bool shared() const noexcept { return options_.shared; }
    FunctionRegistry& functions() { return options_.functions; }

    // -- signals -----------------------------------------------------------

    SignalId create_source(Value initial, std::optional<std::string> name = std::nullopt);
    SignalId create_derived(std::vector<SignalId> deps, std::string function, std::optional<std::string> name = std::nullopt);

    /// Equal-value writes still append an entry.
    VersionStamp set(const SignalId& signal, Value value);
    const Value& get(const SignalId& signal) const;

    /// Runs `body` (which calls set) with propagation deferred to the end:
    /// one pass, each affected derived signal recomputes once.
    void batch(const std::function<void()>& body);
    bool batch_open() const noexcept { return batch_.open; }

    bool has_signal(const SignalId& signal) const;
    SignalKind kind_of(const SignalId& signal) const;
    /// Signals visible on the current branch, in registration order.
    std::vector<SignalId> signals() const;
    std::uint64_t recompute_count(const SignalId& signal) const;
    const SignalGraph& graph() const { return graph_; }

    // -- history -----------------------------------------------------------

    std::vector<HistoryEntry> history_of(const SignalId& signal) const;
    Value value_at(const SignalId& signal, VersionStamp at) const;
    Value value_at_time(const SignalId& signal, WallTime at) const;
    const History& history() const { return history_; }
    std::uint64_t lamport() const noexcept { return lamport_; }

    CheckpointId checkpoint(std::string label);
    BranchId branch_from(CheckpointId cp, std::string label);
    void checkout(BranchId branch);
    BranchId current_branch() const noexcept { return branch_; }
    std::vector<SignalDiff> diff(CheckpointId a, CheckpointId b) const;

    PathId create_path(std::string label);
    void append_step(PathId path, CheckpointId cp);
    std::vector<ExplorationPath> list_paths() const;

    // -- actions -----------------------------------------------------------

    ActionId begin_action(std::string label, std::string kind);
    ActionBlock end_action(ActionId id);
    std::vector<ActionBlock> actions(const ActionFilter& filter = {}) const;
    const ActionLog& action_log() const { return actions_; }

    /// Reverses the most recent local top-level action that changed at
    /// least one source signal. Emits restoring sets as a new "undo:<label>"
    /// block; returns the undone action.
    std::optional<ActionId> undo();
    std::optional<ActionId> redo();
    bool can_undo() const;
    bool can_redo() const;

    // -- replication (shared mode) -----------------------------------------

    /// Transaction for a closed top-level block. end_action commits every
    /// top-level block automatically; this returns that transaction.
    const Transaction& commit_local(const ActionBlock& block);
    ApplyResult apply_remote(const Transaction& txn);
    ApplyResult apply_remote(std::span<const std::uint8_t> bytes);
    /// Committed local transactions not yet taken, in commit order.
    std::vector<Transaction> take_outbox();
    std::vector<SharedLogEntry> shared_action_log() const;
    const VectorClock& delivered() const { return delivered_; }
    std::size_t buffered_count() const { return buffer_.size(); }
    std::size_t max_buffer_depth() const { return max_buffer_depth_; }

    // -- trace & snapshots -------------------------------------------------

    TraceHeader trace_header() const;
    const std::vector<TraceEvent>& events() const { return events_; }
    std::string trace_text() const;

    /// Canonical JSON of the whole replica-local state: registry, values,
    /// all histories, the action log, checkpoints, branches, paths and
    /// the shared log.
    std::string snapshot() const;

    /// Canonical JSON of the replicated state only: registry, current
    /// values, source-signal histories, checkpoints, paths and the shared
    /// action log. Equal on replicas that delivered the same transactions.
    std::string replicated_state() const;

    /// Structural invariant violations (empty when all hold).
    std::vector<std::string> check_invariants() const;

    /// True for a replay stopped part-way (replay with `upto`): queries
    /// work, mutations throw Error(HistoricalSnapshot).
    bool historical() const noexcept { return halted_; }

private:
    friend class detail::Replayer;

    struct BatchState {
        bool open = false;
        std::optional<ActionId> implicit_action;
        std::optional<std::size_t> last_op_record;
    };

    WallTime now() const;
    std::uint64_t tick() { return ++lamport_; }
    VersionStamp next_stamp() { return VersionStamp {tick(), options_.id}; }
    void ensure_mutable() const;
    void require_no_scope(const char* what) const;

    ActionId next_action_id() { return ActionId {options_.id, ++action_counter_}; }
    ActionBlock& open_block(std::string label, std::string kind, bool implicit, std::optional<ActionId> reverts);
    ActionBlock& close_block(ActionId id);
    bool enter_implicit(const std::string& label);
    void leave_implicit(bool opened);
    const ActionBlock& innermost_block() const;
    void on_top_level_closed(ActionBlock& block);
    bool has_source_entries(ActionId id) const;

    void begin_batch_scope();
    void end_batch_scope();
    BatchMark batch_mark() const { return batch_.open ? BatchMark::Open : BatchMark::None; }
    void note_batch_record();

    void record_entry(HistoryEntry entry, bool implicit, BatchMark batch);
    void run_propagation(ActionId attribute_to);
    void refresh_working_state();

    void push_op(Op op);
    void commit_transaction(ActionBlock& block);
    ActionDescriptor descriptor_of(const ActionBlock& block) const;
    bool ready(const Transaction& txn) const;
    void apply_ready(const Transaction& txn);
    void apply_op(const Op& op, const Transaction& txn);
    void register_remote_blocks(const ActionDescriptor& d, std::optional<ActionId> parent, ReplicaId origin);
    void emit_remote_block_ends(const ActionDescriptor& d);
    static void validate(const Transaction& txn);

    std::optional<ActionId> restore(bool undoing);

    std::size_t emit(TraceEvent ev);
    SignalNode& visible_node(const SignalId& signal);
    const SignalNode& visible_node(const SignalId& signal) const;
    SignalId fresh_name();
    void lww_write(SignalNode& node, const Op& op, const Value& value);

    ReplicaOptions options_;
    SignalGraph graph_;
    History history_;
    ActionLog actions_;
    std::vector<TraceEvent> events_;

    std::uint64_t lamport_ = 0;
    std::uint64_t action_counter_ = 0;
    std::uint64_t signal_counter_ = 0;
    std::uint64_t checkpoint_counter_ = 0;
    std::uint64_t path_counter_ = 0;
    BranchId branch_ = BranchId::main();
    BatchState batch_;
    std::optional<WallTime> pinned_time_;

    // shared mode
    std::vector<Op> pending_ops_;
    std::uint64_t next_seq_ = 1;
    VectorClock delivered_;
    std::map<TxnId, Transaction> buffer_;
    std::size_t max_buffer_depth_ = 0;
    std::vector<Transaction> outbox_;
    std::map<ActionId, Transaction> committed_;
    std::map<VersionStamp, SharedLogEntry> shared_log_;

    // replay control
    std::optional<std::size_t> halt_after_;
    bool halted_ = false;
};

} // namespace sigtrace
