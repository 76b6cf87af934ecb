#include "sigtrace/replica.hpp"

#include "internal.hpp"
#include "sigtrace/error.hpp"

#include <algorithm>
#include <chrono>
#include <set>

namespace sigtrace {

using detail::Json;

WallTime system_wall_time()
{
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

namespace {

// Pins the wall clock for the duration of one public call so every record
// it produces carries the same time.
class TimePin {
public:
    TimePin(std::optional<WallTime>& slot, const WallClock& clock)
        : slot_(slot)
        , owner_(!slot.has_value())
    {
        if (owner_)
            slot_ = clock();
    }
    ~TimePin()
    {
        if (owner_)
            slot_.reset();
    }
    TimePin(const TimePin&) = delete;
    TimePin& operator=(const TimePin&) = delete;

private:
    std::optional<WallTime>& slot_;
    bool owner_;
};

Json opt_json(const std::optional<ActionId>& id)
{
    return id ? Json(id->str()) : Json(nullptr);
}

Json descriptor_json(const ActionDescriptor& d)
{
    Json children = Json::array();
    for (const auto& c : d.children)
        children.push_back(descriptor_json(c));
    return Json {{"id", d.id.str()}, {"label", d.label}, {"kind", d.kind}, {"implicit", d.implicit},
        {"reverts", opt_json(d.reverts)}, {"started_at", d.started_at}, {"ended_at", d.ended_at},
        {"opened", d.opened.str()}, {"closed", d.closed.str()}, {"children", std::move(children)}};
}

Json registry_json(const SignalNode& n)
{
    Json j {{"kind", to_string(n.kind)}};
    if (n.kind == SignalKind::Derived) {
        Json deps = Json::array();
        for (const auto& d : n.deps)
            deps.push_back(d.name);
        j["deps"] = std::move(deps);
        j["function"] = n.function;
    }
    return j;
}

Json frontier_json(const Frontier& f)
{
    Json obj = Json::object();
    for (const auto& [sig, stamp] : f)
        obj[sig.name] = stamp.str();
    return obj;
}

Json entry_json(const HistoryEntry& e)
{
    return Json {{"stamp", e.stamp.str()}, {"value", detail::value_to_json(e.value)}, {"wall_time", e.wall_time},
        {"action", e.action.str()}, {"origin", to_string(e.origin)}, {"branch", e.branch.str()}};
}

Json paths_json(const History& h)
{
    Json paths = Json::object();
    for (const auto& [id, p] : h.paths()) {
        Json steps = Json::array();
        for (const auto& [stamp, cp] : p.steps)
            steps.push_back(Json::array({stamp.str(), cp.str()}));
        paths[id.str()]
            = Json {{"label", p.label}, {"stamp", p.stamp.str()}, {"created_at", p.created_at}, {"steps", std::move(steps)}};
    }
    return paths;
}

Json checkpoints_json(const History& h)
{
    Json cps = Json::object();
    for (const auto& [id, cp] : h.checkpoints())
        cps[id.str()] = Json {{"label", cp.label}, {"frontier", frontier_json(cp.frontier)}, {"branch", cp.branch.str()},
            {"created_at", cp.created_at}, {"stamp", cp.stamp.str()}};
    return cps;
}

} // namespace

Replica::Replica(ReplicaOptions options)
    : options_(std::move(options))
{
}

// -- internals --------------------------------------------------------------

WallTime Replica::now() const
{
    return pinned_time_ ? *pinned_time_ : options_.clock();
}

void Replica::ensure_mutable() const
{
    if (halted_)
        throw Error(ErrorCode::HistoricalSnapshot, "replica is a partial replay and cannot be modified");
}

void Replica::require_no_scope(const char* what) const
{
    if (batch_.open)
        throw Error(ErrorCode::OpenScope, std::string(what) + " is not allowed inside a batch");
    if (actions_.any_open())
        throw Error(ErrorCode::OpenScope,
            std::string(what) + " is not allowed while action " + actions_.innermost()->id.str() + " is open");
}

std::size_t Replica::emit(TraceEvent ev)
{
    events_.push_back(std::move(ev));
    if (halt_after_ && events_.size() == *halt_after_) {
        halted_ = true;
        throw detail::ReplayHalt {};
    }
    return events_.size() - 1;
}

SignalNode& Replica::visible_node(const SignalId& signal)
{
    auto* n = graph_.find(signal);
    if (!n || !n->visible)
        throw Error(ErrorCode::UnknownSignal, "no signal '" + signal.name + "'");
    return *n;
}

const SignalNode& Replica::visible_node(const SignalId& signal) const
{
    const auto* n = graph_.find(signal);
    if (!n || !n->visible)
        throw Error(ErrorCode::UnknownSignal, "no signal '" + signal.name + "'");
    return *n;
}

SignalId Replica::fresh_name()
{
    for (;;) {
        SignalId id {"s" + std::to_string(options_.id) + "." + std::to_string(++signal_counter_)};
        if (!graph_.contains(id))
            return id;
    }
}

ActionBlock& Replica::open_block(std::string label, std::string kind, bool implicit, std::optional<ActionId> reverts)
{
    ActionBlock b;
    b.id = next_action_id();
    b.label = std::move(label);
    b.kind = std::move(kind);
    b.started_at = now();
    b.opened = next_stamp();
    b.origin_replica = options_.id;
    b.implicit = implicit;
    b.reverts = reverts;
    b.branch = branch_;
    auto& blk = actions_.open(std::move(b));
    if (!implicit)
        emit(record::ActionBegin {blk.id, blk.label, blk.kind, blk.parent, blk.reverts, blk.opened, blk.started_at});
    return blk;
}

ActionBlock& Replica::close_block(ActionId id)
{
    (void)id;
    auto& blk = actions_.close_innermost(now(), next_stamp());
    emit(record::ActionEnd {blk.id, blk.label, blk.kind, blk.parent, blk.reverts, blk.implicit, blk.origin_replica,
        blk.opened, blk.closed, blk.started_at, blk.entries.size(), blk.ended_at});
    if (blk.top_level())
        on_top_level_closed(blk);
    return blk;
}

bool Replica::enter_implicit(const std::string& label)
{
    if (actions_.any_open())
        return false;
    if (batch_.open) {
        batch_.implicit_action = open_block("batch", "implicit", true, std::nullopt).id;
        return false;
    }
    open_block(label, "implicit", true, std::nullopt);
    return true;
}

void Replica::leave_implicit(bool opened)
{
    if (opened)
        close_block(actions_.innermost()->id);
}

const ActionBlock& Replica::innermost_block() const
{
    return *actions_.innermost();
}

bool Replica::has_source_entries(ActionId id) const
{
    for (const auto* blk : actions_.tree(id))
        for (const auto& stamp : blk->entries)
            if (const auto* e = history_.find(stamp); e && e->origin == Origin::Source)
                return true;
    return false;
}

void Replica::on_top_level_closed(ActionBlock& block)
{
    if (!block.reverts && has_source_entries(block.id)) {
        auto& st = actions_.stacks(block.branch);
        st.undo.push_back(UndoItem {block.id, block.label});
        st.redo.clear();
    }
    if (options_.shared)
        commit_transaction(block);
}

void Replica::begin_batch_scope()
{
    if (batch_.open)
        throw Error(ErrorCode::NestedBatch, "batches do not nest");
    batch_ = BatchState {};
    batch_.open = true;
}

void Replica::end_batch_scope()
{
    auto state = batch_;
    batch_ = BatchState {};
    if (state.last_op_record) {
        auto& ev = events_[*state.last_op_record];
        std::visit(
            [](auto& r) {
                if constexpr (requires { r.batch; })
                    r.batch = BatchMark::Close;
            },
            ev);
    }
    if (graph_.has_pending())
        run_propagation(actions_.innermost()->id);
    if (state.implicit_action)
        close_block(*state.implicit_action);
}

void Replica::note_batch_record()
{
    if (batch_.open)
        batch_.last_op_record = events_.size() - 1;
}

void Replica::record_entry(HistoryEntry entry, bool implicit, BatchMark batch)
{
    auto* blk = actions_.find(entry.action);
    if (!blk)
        throw Error(ErrorCode::MalformedTransaction, "entry references unknown action " + entry.action.str());
    if (!history_.insert(entry))
        throw Error(ErrorCode::MalformedTransaction, "duplicate stamp " + entry.stamp.str());
    blk->entries.push_back(entry.stamp);
    emit(record::Entry {entry.signal, entry.stamp, entry.value, entry.action, implicit, entry.origin, entry.branch, batch,
        entry.wall_time});
}

void Replica::run_propagation(ActionId attribute_to)
{
    bool implicit = actions_.at(attribute_to).implicit;
    auto& nodes = graph_.nodes();
    std::vector<Value> args;
    graph_.propagate([&](SignalNode& n) {
        args.clear();
        for (auto d : n.dep_orders)
            args.push_back(nodes[d].current);
        Value v = options_.functions.get(n.function)(args);
        auto stamp = next_stamp();
        n.current = v;
        n.current_stamp = stamp;
        record_entry(HistoryEntry {n.id, stamp, std::move(v), now(), attribute_to, Origin::Derived, branch_}, implicit,
            BatchMark::None);
    });
}

void Replica::refresh_working_state()
{
    for (auto& n : graph_.nodes()) {
        const auto* e = history_.latest(n.id, branch_);
        n.visible = e != nullptr;
        if (e) {
            n.current = e->value;
            n.current_stamp = e->stamp;
        } else {
            n.current = Value();
            n.current_stamp = VersionStamp {};
        }
    }
}

// -- signals ----------------------------------------------------------------

SignalId Replica::create_source(Value initial, std::optional<std::string> name)
{
    ensure_mutable();
    SignalId id = name ? SignalId {*name} : fresh_name();
    if (graph_.contains(id))
        throw Error(ErrorCode::DuplicateName, "signal '" + id.name + "' already exists");
    TimePin pin(pinned_time_, options_.clock);
    bool opened = enter_implicit("create:" + id.name);
    const auto& blk = innermost_block();
    auto action = blk.id;
    bool implicit = blk.implicit;
    auto& node = graph_.add_source(id);
    auto stamp = next_stamp();
    node.current = initial;
    node.current_stamp = stamp;
    node.visible = true;
    push_op(Op {stamp, action, now(), op::DeclareSource {id, initial}});
    emit(record::DeclareSource {id, stamp, initial, action, implicit, batch_mark(), now()});
    note_batch_record();
    record_entry(HistoryEntry {id, stamp, std::move(initial), now(), action, Origin::Source, branch_}, implicit,
        BatchMark::None);
    leave_implicit(opened);
    return id;
}

SignalId Replica::create_derived(std::vector<SignalId> deps, std::string function, std::optional<std::string> name)
{
    ensure_mutable();
    if (batch_.open)
        throw Error(ErrorCode::OpenScope, "create_derived is not allowed inside a batch");
    SignalId id = name ? SignalId {*name} : fresh_name();
    if (std::find(deps.begin(), deps.end(), id) != deps.end())
        throw Error(ErrorCode::CycleDetected, "signal '" + id.name + "' depends on itself");
    if (graph_.contains(id))
        throw Error(ErrorCode::DuplicateName, "signal '" + id.name + "' already exists");
    for (const auto& d : deps)
        visible_node(d);
    const auto& fn = options_.functions.get(function);
    TimePin pin(pinned_time_, options_.clock);
    bool opened = enter_implicit("derive:" + id.name);
    const auto& blk = innermost_block();
    auto action = blk.id;
    bool implicit = blk.implicit;
    graph_.add_derived(id, deps, function);
    auto& node = graph_.at(id);
    std::vector<Value> args;
    for (auto d : node.dep_orders)
        args.push_back(graph_.nodes()[d].current);
    Value v = fn(args);
    auto stamp = next_stamp();
    node.current = v;
    node.current_stamp = stamp;
    node.visible = true;
    push_op(Op {stamp, action, now(), op::DeclareDerived {id, deps, function}});
    emit(record::DeclareDerived {id, stamp, std::move(deps), std::move(function), action, implicit, now()});
    record_entry(HistoryEntry {id, stamp, std::move(v), now(), action, Origin::Derived, branch_}, implicit, BatchMark::None);
    leave_implicit(opened);
    return id;
}

VersionStamp Replica::set(const SignalId& signal, Value value)
{
    ensure_mutable();
    auto& node = visible_node(signal);
    if (node.kind == SignalKind::Derived)
        throw Error(ErrorCode::DerivedNotSettable, "signal '" + signal.name + "' is derived");
    TimePin pin(pinned_time_, options_.clock);
    bool opened = enter_implicit("set:" + signal.name);
    const auto& blk = innermost_block();
    auto action = blk.id;
    bool implicit = blk.implicit;
    auto stamp = next_stamp();
    node.current = value;
    node.current_stamp = stamp;
    graph_.mark_changed(node);
    push_op(Op {stamp, action, now(), op::SetValue {signal, value}});
    record_entry(HistoryEntry {signal, stamp, std::move(value), now(), action, Origin::Source, branch_}, implicit,
        batch_mark());
    note_batch_record();
    if (!batch_.open)
        run_propagation(action);
    leave_implicit(opened);
    return stamp;
}

const Value& Replica::get(const SignalId& signal) const
{
    return visible_node(signal).current;
}

void Replica::batch(const std::function<void()>& body)
{
    ensure_mutable();
    TimePin pin(pinned_time_, options_.clock);
    begin_batch_scope();
    try {
        body();
    } catch (const detail::ReplayHalt&) {
        throw;
    } catch (...) {
        end_batch_scope();
        throw;
    }
    end_batch_scope();
}

bool Replica::has_signal(const SignalId& signal) const
{
    const auto* n = graph_.find(signal);
    return n && n->visible;
}

SignalKind Replica::kind_of(const SignalId& signal) const
{
    return visible_node(signal).kind;
}

std::vector<SignalId> Replica::signals() const
{
    std::vector<SignalId> out;
    for (const auto& n : graph_.nodes())
        if (n.visible)
            out.push_back(n.id);
    return out;
}

std::uint64_t Replica::recompute_count(const SignalId& signal) const
{
    return visible_node(signal).recomputations;
}

// -- history ----------------------------------------------------------------

std::vector<HistoryEntry> Replica::history_of(const SignalId& signal) const
{
    visible_node(signal);
    std::vector<HistoryEntry> out;
    for (const auto* e : history_.entries_of(signal, branch_))
        out.push_back(*e);
    return out;
}

Value Replica::value_at(const SignalId& signal, VersionStamp at) const
{
    visible_node(signal);
    const auto* e = history_.latest_at(signal, branch_, at);
    if (!e)
        throw Error(ErrorCode::BeforeFirstEntry, "'" + signal.name + "' has no entry at or before " + at.str());
    return e->value;
}

Value Replica::value_at_time(const SignalId& signal, WallTime at) const
{
    visible_node(signal);
    const auto* e = history_.latest_at_time(signal, branch_, at);
    if (!e)
        throw Error(ErrorCode::BeforeFirstEntry,
            "'" + signal.name + "' has no entry at or before time " + std::to_string(at));
    return e->value;
}

CheckpointId Replica::checkpoint(std::string label)
{
    ensure_mutable();
    require_no_scope("checkpoint");
    TimePin pin(pinned_time_, options_.clock);
    bool opened = enter_implicit("checkpoint:" + label);
    const auto& blk = innermost_block();
    auto action = blk.id;
    bool implicit = blk.implicit;
    CheckpointId id {options_.id, ++checkpoint_counter_};
    auto stamp = next_stamp();
    Frontier frontier;
    for (const auto& n : graph_.nodes()) {
        if (!n.visible || (options_.shared && n.kind != SignalKind::Source))
            continue;
        if (const auto* e = history_.latest(n.id, branch_))
            frontier.emplace(n.id, e->stamp);
    }
    history_.add_checkpoint(Checkpoint {id, label, frontier, branch_, now(), stamp});
    push_op(Op {stamp, action, now(), op::DeclareCheckpoint {id, label, frontier}});
    emit(record::Checkpoint {id, std::move(label), branch_, stamp, std::move(frontier), action, implicit, now()});
    leave_implicit(opened);
    return id;
}

BranchId Replica::branch_from(CheckpointId cp, std::string label)
{
    ensure_mutable();
    if (options_.shared)
        throw Error(ErrorCode::BranchingNotSupportedInSharedMode, "branching is disabled on replicated documents");
    require_no_scope("branch_from");
    const auto& c = history_.checkpoint(cp);
    TimePin pin(pinned_time_, options_.clock);
    auto parent = c.branch;
    auto id = history_.add_branch(label, parent, cp, c.stamp, now());
    branch_ = id;
    refresh_working_state();
    emit(record::Branch {record::Branch::Kind::Fork, id, std::move(label), parent, cp, now()});
    return id;
}

void Replica::checkout(BranchId branch)
{
    ensure_mutable();
    if (options_.shared)
        throw Error(ErrorCode::BranchingNotSupportedInSharedMode, "branching is disabled on replicated documents");
    require_no_scope("checkout");
    if (!history_.has_branch(branch))
        throw Error(ErrorCode::UnknownBranch, "no branch " + branch.str());
    TimePin pin(pinned_time_, options_.clock);
    branch_ = branch;
    refresh_working_state();
    emit(record::Branch {record::Branch::Kind::Checkout, branch, "", std::nullopt, std::nullopt, now()});
}

std::vector<SignalDiff> Replica::diff(CheckpointId a, CheckpointId b) const
{
    return history_.diff(a, b);
}

PathId Replica::create_path(std::string label)
{
    ensure_mutable();
    TimePin pin(pinned_time_, options_.clock);
    bool opened = enter_implicit("path:" + label);
    const auto& blk = innermost_block();
    auto action = blk.id;
    bool implicit = blk.implicit;
    PathId id {options_.id, ++path_counter_};
    auto stamp = next_stamp();
    history_.add_path(ExplorationPath {id, label, stamp, now(), {}});
    push_op(Op {stamp, action, now(), op::CreatePath {id, label}});
    emit(record::Path {record::Path::Kind::Create, id, std::move(label), std::nullopt, stamp, action, implicit, batch_mark(),
        now()});
    note_batch_record();
    leave_implicit(opened);
    return id;
}

void Replica::append_step(PathId path, CheckpointId cp)
{
    ensure_mutable();
    auto& p = history_.path(path);
    history_.checkpoint(cp);
    TimePin pin(pinned_time_, options_.clock);
    bool opened = enter_implicit("step:" + p.label);
    const auto& blk = innermost_block();
    auto action = blk.id;
    bool implicit = blk.implicit;
    auto stamp = next_stamp();
    p.steps.emplace(stamp, cp);
    push_op(Op {stamp, action, now(), op::AppendStep {path, cp}});
    emit(record::Path {record::Path::Kind::Step, path, "", cp, stamp, action, implicit, batch_mark(), now()});
    note_batch_record();
    leave_implicit(opened);
}

std::vector<ExplorationPath> Replica::list_paths() const
{
    std::vector<ExplorationPath> out;
    for (const auto& [_, p] : history_.paths())
        out.push_back(p);
    return out;
}

// -- actions ----------------------------------------------------------------

ActionId Replica::begin_action(std::string label, std::string kind)
{
    ensure_mutable();
    if (batch_.open)
        throw Error(ErrorCode::OpenScope, "begin_action is not allowed inside a batch");
    TimePin pin(pinned_time_, options_.clock);
    return open_block(std::move(label), std::move(kind), false, std::nullopt).id;
}

ActionBlock Replica::end_action(ActionId id)
{
    ensure_mutable();
    if (batch_.open)
        throw Error(ErrorCode::OpenScope, "end_action is not allowed inside a batch");
    const auto* b = actions_.find(id);
    if (!b || !b->open || b->origin_replica != options_.id)
        throw Error(ErrorCode::UnknownAction, "no open action " + id.str());
    if (actions_.innermost()->id != id)
        throw Error(ErrorCode::NotInnermost,
            "action " + id.str() + " is not innermost (" + actions_.innermost()->id.str() + " is still open)");
    TimePin pin(pinned_time_, options_.clock);
    return close_block(id);
}

std::vector<ActionBlock> Replica::actions(const ActionFilter& filter) const
{
    return actions_.query(filter);
}

std::optional<ActionId> Replica::undo()
{
    return restore(true);
}

std::optional<ActionId> Replica::redo()
{
    return restore(false);
}

bool Replica::can_undo() const
{
    auto it = actions_.all_stacks().find(branch_);
    return it != actions_.all_stacks().end() && !it->second.undo.empty();
}

bool Replica::can_redo() const
{
    auto it = actions_.all_stacks().find(branch_);
    return it != actions_.all_stacks().end() && !it->second.redo.empty();
}

std::optional<ActionId> Replica::restore(bool undoing)
{
    ensure_mutable();
    require_no_scope(undoing ? "undo" : "redo");
    auto& st = actions_.stacks(branch_);
    auto& from = undoing ? st.undo : st.redo;
    if (from.empty())
        return std::nullopt;
    TimePin pin(pinned_time_, options_.clock);
    UndoItem item = from.back();
    from.pop_back();

    std::vector<const HistoryEntry*> touched;
    for (const auto* blk : actions_.tree(item.target))
        for (const auto& stamp : blk->entries)
            if (const auto* e = history_.find(stamp); e && e->origin == Origin::Source)
                touched.push_back(e);
    std::sort(touched.begin(), touched.end(), [](const auto* a, const auto* b) { return a->stamp < b->stamp; });

    std::vector<std::pair<SignalId, Value>> writes;
    for (const auto* e : touched) {
        auto it = std::find_if(writes.begin(), writes.end(), [&](const auto& w) { return w.first == e->signal; });
        if (undoing) {
            if (it != writes.end())
                continue;
            const auto* before = history_.latest_before(e->signal, branch_, touched.front()->stamp);
            if (before)
                writes.emplace_back(e->signal, before->value);
        } else if (it != writes.end()) {
            it->second = e->value;
        } else {
            writes.emplace_back(e->signal, e->value);
        }
    }

    auto& blk = open_block((undoing ? "undo:" : "redo:") + item.label, undoing ? "undo" : "redo", false, item.target);
    auto block_id = blk.id;
    begin_batch_scope();
    for (auto& [sig, v] : writes) {
        const auto* n = graph_.find(sig);
        if (n && n->visible && n->kind == SignalKind::Source)
            set(sig, std::move(v));
    }
    end_batch_scope();
    close_block(block_id);
    if (undoing)
        actions_.stacks(branch_).redo.push_back(item);
    else
        actions_.stacks(branch_).undo.push_back(UndoItem {block_id, item.label});
    return item.target;
}

// -- replication ------------------------------------------------------------

void Replica::push_op(Op op)
{
    if (options_.shared)
        pending_ops_.push_back(std::move(op));
}

ActionDescriptor Replica::descriptor_of(const ActionBlock& block) const
{
    ActionDescriptor d;
    d.id = block.id;
    d.label = block.label;
    d.kind = block.kind;
    d.implicit = block.implicit;
    d.reverts = block.reverts;
    d.started_at = block.started_at;
    d.ended_at = block.ended_at;
    d.opened = block.opened;
    d.closed = block.closed;
    for (const auto& c : block.children)
        d.children.push_back(descriptor_of(actions_.at(c)));
    return d;
}

void Replica::commit_transaction(ActionBlock& block)
{
    Transaction t;
    t.id = TxnId {options_.id, next_seq_++};
    t.lamport = block.closed.lamport;
    for (const auto& [r, seq] : delivered_)
        if (r != options_.id)
            t.deps.emplace(r, seq);
    t.ops = std::move(pending_ops_);
    pending_ops_.clear();
    t.action = descriptor_of(block);
    delivered_[options_.id] = t.id.seq;
    VersionStamp order {t.lamport, options_.id};
    shared_log_.insert_or_assign(order, SharedLogEntry {t.id, order, t.action});
    auto bytes = encode(t);
    auto& stored = committed_.insert_or_assign(block.id, std::move(t)).first->second;
    outbox_.push_back(stored);
    emit(record::TxnCommit {stored.id, stored.lamport, block.label, stored.ops.size(), std::move(bytes), now()});
}

const Transaction& Replica::commit_local(const ActionBlock& block)
{
    if (!options_.shared)
        throw Error(ErrorCode::NotShared, "commit_local requires a shared replica");
    const auto& top = actions_.top_level_of(block.id);
    if (top.open)
        throw Error(ErrorCode::UnknownAction, "action " + top.id.str() + " is still open");
    auto it = committed_.find(top.id);
    if (it == committed_.end())
        throw Error(ErrorCode::UnknownAction, "action " + top.id.str() + " was not committed on this replica");
    return it->second;
}

void Replica::validate(const Transaction& txn)
{
    auto bad = [&](const std::string& why) {
        throw Error(ErrorCode::MalformedTransaction, "transaction " + txn.id.str() + ": " + why);
    };
    if (txn.id.seq == 0)
        bad("sequence numbers start at 1");
    if (txn.action.id.replica != txn.id.replica)
        bad("descriptor belongs to another replica");
    if (txn.deps.contains(txn.id.replica))
        bad("deps must exclude the sender");
    std::set<ActionId> blocks;
    std::vector<const ActionDescriptor*> stack {&txn.action};
    while (!stack.empty()) {
        const auto* d = stack.back();
        stack.pop_back();
        if (d->id.replica != txn.id.replica || !blocks.insert(d->id).second)
            bad("invalid action tree");
        if (d->closed.lamport > txn.lamport)
            bad("action closes after the transaction lamport");
        for (const auto& c : d->children)
            stack.push_back(&c);
    }
    for (const auto& op : txn.ops) {
        if (op.stamp.replica != txn.id.replica)
            bad("op stamp " + op.stamp.str() + " from another replica");
        if (op.stamp.lamport > txn.lamport)
            bad("op stamp " + op.stamp.str() + " exceeds the transaction lamport");
        if (!blocks.contains(op.action))
            bad("op references action " + op.action.str() + " outside the transaction");
        if (std::holds_alternative<op::DeclareCheckpoint>(op.body)
            && std::get<op::DeclareCheckpoint>(op.body).id.replica != txn.id.replica)
            bad("foreign checkpoint id");
        if (std::holds_alternative<op::CreatePath>(op.body) && std::get<op::CreatePath>(op.body).id.replica != txn.id.replica)
            bad("foreign path id");
    }
}

bool Replica::ready(const Transaction& txn) const
{
    auto have = [&](ReplicaId r) {
        auto it = delivered_.find(r);
        return it == delivered_.end() ? std::uint64_t {0} : it->second;
    };
    if (have(txn.id.replica) + 1 != txn.id.seq)
        return false;
    for (const auto& [r, seq] : txn.deps)
        if (have(r) < seq)
            return false;
    return true;
}

ApplyResult Replica::apply_remote(std::span<const std::uint8_t> bytes)
{
    return apply_remote(decode(bytes));
}

ApplyResult Replica::apply_remote(const Transaction& txn)
{
    ensure_mutable();
    if (!options_.shared)
        throw Error(ErrorCode::NotShared, "apply_remote requires a shared replica");
    if (batch_.open)
        throw Error(ErrorCode::OpenScope, "apply_remote is not allowed inside a batch");
    validate(txn);
    if (txn.id.replica == options_.id) {
        auto it = delivered_.find(options_.id);
        if (it == delivered_.end() || txn.id.seq > it->second)
            throw Error(ErrorCode::MalformedTransaction, "transaction " + txn.id.str() + " claims to be ours but is unknown");
    }
    TimePin pin(pinned_time_, options_.clock);
    auto it = delivered_.find(txn.id.replica);
    bool duplicate = (it != delivered_.end() && txn.id.seq <= it->second) || buffer_.contains(txn.id);
    ApplyResult result = duplicate ? ApplyResult::Duplicate : ready(txn) ? ApplyResult::Applied : ApplyResult::Buffered;
    emit(record::TxnDeliver {txn.id, static_cast<record::DeliverResult>(result), encode(txn), now()});
    if (result == ApplyResult::Duplicate)
        return result;
    if (result == ApplyResult::Buffered) {
        buffer_.emplace(txn.id, txn);
        max_buffer_depth_ = std::max(max_buffer_depth_, buffer_.size());
        return result;
    }
    apply_ready(txn);
    for (bool progress = true; progress;) {
        progress = false;
        for (auto bt = buffer_.begin(); bt != buffer_.end(); ++bt) {
            if (ready(bt->second)) {
                auto next = std::move(bt->second);
                buffer_.erase(bt);
                apply_ready(next);
                progress = true;
                break;
            }
        }
    }
    return result;
}

void Replica::register_remote_blocks(const ActionDescriptor& d, std::optional<ActionId> parent, ReplicaId origin)
{
    for (const auto& c : d.children)
        register_remote_blocks(c, d.id, origin);
    ActionBlock b;
    b.id = d.id;
    b.label = d.label;
    b.kind = d.kind;
    b.parent = parent;
    for (const auto& c : d.children)
        b.children.push_back(c.id);
    b.started_at = d.started_at;
    b.ended_at = d.ended_at;
    b.opened = d.opened;
    b.closed = d.closed;
    b.origin_replica = origin;
    b.implicit = d.implicit;
    b.reverts = d.reverts;
    b.branch = BranchId::main();
    actions_.add_closed(std::move(b));
}

void Replica::emit_remote_block_ends(const ActionDescriptor& d)
{
    for (const auto& c : d.children)
        emit_remote_block_ends(c);
    const auto& b = actions_.at(d.id);
    emit(record::ActionEnd {b.id, b.label, b.kind, b.parent, b.reverts, b.implicit, b.origin_replica, b.opened, b.closed,
        b.started_at, b.entries.size(), b.ended_at});
}

void Replica::lww_write(SignalNode& node, const Op& op, const Value& value)
{
    bool wins = options_.merge_fault == MergeFault::InvertLastWriterWins ? op.stamp < node.current_stamp
                                                                         : node.current_stamp < op.stamp;
    if (wins) {
        node.current = value;
        node.current_stamp = op.stamp;
        graph_.mark_changed(node);
    }
    record_entry(HistoryEntry {node.id, op.stamp, value, op.wall_time, op.action, Origin::Source, BranchId::main()},
        actions_.at(op.action).implicit, BatchMark::None);
}

void Replica::apply_op(const Op& op, const Transaction& txn)
{
    auto bad = [&](const std::string& why) {
        throw Error(ErrorCode::MalformedTransaction, "transaction " + txn.id.str() + ": " + why);
    };
    bool implicit = actions_.at(op.action).implicit;
    std::visit(
        [&](const auto& body) {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, op::DeclareSource>) {
                if (auto* n = graph_.find(body.signal)) {
                    if (n->kind != SignalKind::Source)
                        throw Error(ErrorCode::ConflictingDeclaration,
                            "'" + body.signal.name + "' is already declared as a derived signal");
                    lww_write(*n, op, body.initial);
                    return;
                }
                auto& n = graph_.add_source(body.signal);
                n.visible = true;
                n.current = body.initial;
                n.current_stamp = op.stamp;
                emit(record::DeclareSource {body.signal, op.stamp, body.initial, op.action, implicit, BatchMark::None,
                    op.wall_time});
                record_entry(HistoryEntry {body.signal, op.stamp, body.initial, op.wall_time, op.action, Origin::Source,
                                 BranchId::main()},
                    implicit, BatchMark::None);
            } else if constexpr (std::is_same_v<T, op::DeclareDerived>) {
                if (const auto* n = graph_.find(body.signal)) {
                    if (n->kind != SignalKind::Derived || n->deps != body.deps || n->function != body.function)
                        throw Error(ErrorCode::ConflictingDeclaration,
                            "'" + body.signal.name + "' is already declared differently");
                    return;
                }
                for (const auto& d : body.deps)
                    if (!graph_.contains(d))
                        bad("derived '" + body.signal.name + "' depends on unknown '" + d.name + "'");
                if (std::find(body.deps.begin(), body.deps.end(), body.signal) != body.deps.end())
                    bad("derived '" + body.signal.name + "' depends on itself");
                const auto& fn = options_.functions.get(body.function);
                graph_.add_derived(body.signal, body.deps, body.function);
                auto& n = graph_.at(body.signal);
                std::vector<Value> args;
                for (auto d : n.dep_orders)
                    args.push_back(graph_.nodes()[d].current);
                Value v = fn(args);
                auto stamp = next_stamp();
                n.visible = true;
                n.current = v;
                n.current_stamp = stamp;
                emit(record::DeclareDerived {body.signal, stamp, body.deps, body.function, op.action, implicit, now()});
                record_entry(HistoryEntry {body.signal, stamp, std::move(v), now(), op.action, Origin::Derived,
                                 BranchId::main()},
                    implicit, BatchMark::None);
            } else if constexpr (std::is_same_v<T, op::SetValue>) {
                auto* n = graph_.find(body.signal);
                if (!n)
                    bad("set of unknown signal '" + body.signal.name + "'");
                if (n->kind != SignalKind::Source)
                    bad("set of derived signal '" + body.signal.name + "'");
                lww_write(*n, op, body.value);
            } else if constexpr (std::is_same_v<T, op::DeclareCheckpoint>) {
                if (history_.has_checkpoint(body.id))
                    bad("checkpoint " + body.id.str() + " already exists");
                for (const auto& [sig, stamp] : body.frontier) {
                    const auto* e = history_.find(stamp);
                    if (!e || e->signal != sig)
                        bad("checkpoint frontier stamp " + stamp.str() + " does not resolve");
                }
                history_.add_checkpoint(
                    Checkpoint {body.id, body.label, body.frontier, BranchId::main(), op.wall_time, op.stamp});
                emit(record::Checkpoint {
                    body.id, body.label, BranchId::main(), op.stamp, body.frontier, op.action, implicit, op.wall_time});
            } else if constexpr (std::is_same_v<T, op::CreatePath>) {
                if (history_.has_path(body.id))
                    bad("path " + body.id.str() + " already exists");
                history_.add_path(ExplorationPath {body.id, body.label, op.stamp, op.wall_time, {}});
                emit(record::Path {record::Path::Kind::Create, body.id, body.label, std::nullopt, op.stamp, op.action,
                    implicit, BatchMark::None, op.wall_time});
            } else if constexpr (std::is_same_v<T, op::AppendStep>) {
                if (!history_.has_path(body.path))
                    bad("step on unknown path " + body.path.str());
                if (!history_.has_checkpoint(body.checkpoint))
                    bad("step references unknown checkpoint " + body.checkpoint.str());
                history_.path(body.path).steps.emplace(op.stamp, body.checkpoint);
                emit(record::Path {record::Path::Kind::Step, body.path, "", body.checkpoint, op.stamp, op.action,
                    implicit, BatchMark::None, op.wall_time});
            }
        },
        op.body);
}

void Replica::apply_ready(const Transaction& txn)
{
    lamport_ = std::max(lamport_, txn.lamport);
    register_remote_blocks(txn.action, std::nullopt, txn.id.replica);
    for (const auto& op : txn.ops)
        apply_op(op, txn);
    if (graph_.has_pending())
        run_propagation(txn.action.id);
    delivered_[txn.id.replica] = txn.id.seq;
    VersionStamp order {txn.lamport, txn.id.replica};
    shared_log_.insert_or_assign(order, SharedLogEntry {txn.id, order, txn.action});
    emit_remote_block_ends(txn.action);
}

std::vector<Transaction> Replica::take_outbox()
{
    return std::exchange(outbox_, {});
}

std::vector<SharedLogEntry> Replica::shared_action_log() const
{
    std::vector<SharedLogEntry> out;
    out.reserve(shared_log_.size());
    for (const auto& [_, e] : shared_log_)
        out.push_back(e);
    return out;
}

// -- trace & snapshots ------------------------------------------------------

TraceHeader Replica::trace_header() const
{
    return TraceHeader {kTraceFormatVersion, options_.id, options_.shared};
}

std::string Replica::trace_text() const
{
    return serialize_trace(trace_header(), events_);
}

std::string Replica::replicated_state() const
{
    Json registry = Json::object();
    Json values = Json::object();
    Json histories = Json::object();
    for (const auto& n : graph_.nodes()) {
        registry[n.id.name] = registry_json(n);
        values[n.id.name] = detail::value_to_json(n.current);
        if (n.kind != SignalKind::Source)
            continue;
        Json entries = Json::array();
        for (const auto* e : history_.entries_of(n.id, BranchId::main()))
            entries.push_back(Json::array(
                {e->stamp.str(), detail::value_to_json(e->value), e->wall_time, e->action.str()}));
        histories[n.id.name] = std::move(entries);
    }
    Json log = Json::array();
    for (const auto& [order, e] : shared_log_)
        log.push_back(Json::array({order.str(), e.txn.str(), descriptor_json(e.action)}));
    Json state {{"signals", std::move(registry)}, {"values", std::move(values)}, {"histories", std::move(histories)},
        {"checkpoints", checkpoints_json(history_)}, {"paths", paths_json(history_)}, {"log", std::move(log)}};
    return detail::dump(state);
}

std::string Replica::snapshot() const
{
    Json signals = Json::array();
    for (const auto& n : graph_.nodes()) {
        Json s = registry_json(n);
        s["name"] = n.id.name;
        s["visible"] = n.visible;
        s["current"] = detail::value_to_json(n.current);
        s["current_stamp"] = n.current_stamp.str();
        signals.push_back(std::move(s));
    }
    Json log = Json::array();
    for (const auto& [stamp, e] : history_.log()) {
        Json j = entry_json(e);
        j["signal"] = e.signal.name;
        log.push_back(std::move(j));
    }
    Json actions = Json::array();
    auto block_json = [](const ActionBlock& b) {
        Json children = Json::array();
        for (const auto& c : b.children)
            children.push_back(c.str());
        Json entries = Json::array();
        for (const auto& s : b.entries)
            entries.push_back(s.str());
        return Json {{"id", b.id.str()}, {"label", b.label}, {"kind", b.kind}, {"parent", opt_json(b.parent)},
            {"children", std::move(children)}, {"started_at", b.started_at}, {"ended_at", b.ended_at},
            {"opened", b.opened.str()}, {"closed", b.closed.str()}, {"entries", std::move(entries)},
            {"origin", b.origin_replica}, {"implicit", b.implicit}, {"reverts", opt_json(b.reverts)},
            {"branch", b.branch.str()}, {"open", b.open}};
    };
    for (const auto& id : actions_.commit_order())
        actions.push_back(block_json(actions_.at(id)));
    Json open = Json::array();
    for (const auto& id : actions_.open_stack())
        open.push_back(block_json(actions_.at(id)));
    Json branches = Json::array();
    for (const auto& b : history_.branches())
        branches.push_back(Json {{"id", b.id.str()}, {"label", b.label},
            {"parent", b.parent ? Json(b.parent->str()) : Json(nullptr)},
            {"fork_point", b.fork_point ? Json(b.fork_point->str()) : Json(nullptr)},
            {"fork_stamp", b.fork_stamp.str()}, {"created_at", b.created_at}});
    Json stacks = Json::object();
    for (const auto& [branch, st] : actions_.all_stacks()) {
        auto items = [](const std::vector<UndoItem>& v) {
            Json arr = Json::array();
            for (const auto& i : v)
                arr.push_back(Json::array({i.target.str(), i.label}));
            return arr;
        };
        stacks[branch.str()] = Json {{"undo", items(st.undo)}, {"redo", items(st.redo)}};
    }
    Json shared_log = Json::array();
    for (const auto& [order, e] : shared_log_)
        shared_log.push_back(Json::array({order.str(), e.txn.str(), descriptor_json(e.action)}));
    Json delivered = Json::object();
    for (const auto& [r, seq] : delivered_)
        delivered[std::to_string(r)] = seq;
    Json buffered = Json::array();
    for (const auto& [id, _] : buffer_)
        buffered.push_back(id.str());
    Json state {{"replica", options_.id}, {"shared", options_.shared}, {"lamport", lamport_}, {"branch", branch_.str()},
        {"signals", std::move(signals)}, {"log", std::move(log)}, {"actions", std::move(actions)},
        {"open_actions", std::move(open)}, {"checkpoints", checkpoints_json(history_)},
        {"branches", std::move(branches)}, {"paths", paths_json(history_)}, {"undo_stacks", std::move(stacks)},
        {"shared_log", std::move(shared_log)}, {"delivered", std::move(delivered)}, {"buffered", std::move(buffered)},
        {"next_seq", next_seq_}};
    return detail::dump(state);
}

std::vector<std::string> Replica::check_invariants() const
{
    std::vector<std::string> out;
    if (!graph_.is_acyclic())
        out.push_back("dependency graph has a cycle");

    // Partition: each entry is referenced by exactly the block it names.
    std::map<VersionStamp, int> refs;
    for (const auto& [id, b] : actions_.blocks())
        for (const auto& s : b.entries) {
            ++refs[s];
            const auto* e = history_.find(s);
            if (!e)
                out.push_back("action " + id.str() + " references missing entry " + s.str());
            else if (e->action != id)
                out.push_back("entry " + s.str() + " is listed by " + id.str() + " but names " + e->action.str());
        }
    for (const auto& [stamp, e] : history_.log()) {
        if (!graph_.contains(e.signal))
            out.push_back("entry " + stamp.str() + " names unregistered signal '" + e.signal.name + "'");
        auto it = refs.find(stamp);
        if (it == refs.end() || it->second != 1)
            out.push_back("entry " + stamp.str() + " belongs to " + std::to_string(it == refs.end() ? 0 : it->second)
                + " action blocks");
        const auto* b = actions_.find(e.action);
        if (!b)
            continue;
        if (e.origin == Origin::Source && e.stamp.replica == b->origin_replica
            && (e.stamp <= b->opened || (!b->open && b->closed <= e.stamp)))
            out.push_back("entry " + stamp.str() + " lies outside its block " + b->id.str());
    }

    // Nesting.
    for (const auto& [id, b] : actions_.blocks()) {
        if (!b.parent)
            continue;
        const auto* p = actions_.find(*b.parent);
        if (!p) {
            out.push_back("action " + id.str() + " has a missing parent");
            continue;
        }
        if (std::find(p->children.begin(), p->children.end(), id) == p->children.end())
            out.push_back("action " + id.str() + " is not listed by its parent");
        if (!(p->opened < b.opened) || (!p->open && (b.open || !(b.closed < p->closed))))
            out.push_back("action " + id.str() + " does not nest inside " + p->id.str());
    }

    // Per-signal histories sorted by stamp.
    for (const auto& n : graph_.nodes()) {
        for (const auto& br : history_.branches()) {
            auto entries = history_.entries_of(n.id, br.id);
            for (std::size_t i = 1; i < entries.size(); ++i)
                if (!(entries[i - 1]->stamp < entries[i]->stamp))
                    out.push_back("history of '" + n.id.name + "' is out of order");
        }
    }

    // Frontier soundness.
    for (const auto& [id, cp] : history_.checkpoints())
        for (const auto& [sig, stamp] : cp.frontier) {
            const auto* e = history_.find(stamp);
            if (!e || e->signal != sig)
                out.push_back("checkpoint " + id.str() + " frontier stamp " + stamp.str() + " does not resolve");
        }
    for (const auto& [id, p] : history_.paths())
        for (const auto& [stamp, cp] : p.steps)
            if (!history_.has_checkpoint(cp))
                out.push_back("path " + id.str() + " references missing checkpoint " + cp.str());

    // Consistency at rest.
    if (!batch_.open && !halted_) {
        const auto& nodes = graph_.nodes();
        for (const auto& n : nodes) {
            if (n.kind != SignalKind::Derived || !n.visible || !options_.functions.contains(n.function))
                continue;
            std::vector<Value> args;
            for (auto d : n.dep_orders)
                args.push_back(nodes[d].current);
            if (!(options_.functions.get(n.function)(args) == n.current))
                out.push_back("derived '" + n.id.name + "' is stale");
        }
    }
    return out;
}

} // namespace sigtrace
