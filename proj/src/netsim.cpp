#include "sigtrace/netsim.hpp"

#include "internal.hpp"
#include "sigtrace/error.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <memory>
#include <random>

namespace sigtrace::sim {

using detail::Json;

void validate(const SimConfig& c)
{
    auto bad = [](const std::string& why) { throw Error(ErrorCode::InvalidWorkload, why); };
    if (c.replica_count < 1)
        bad("replica_count must be at least 1");
    if (c.replica_count > 1000)
        bad("replica_count must be at most 1000");
    if (c.min_delay < 1)
        bad("min delay must be at least 1 tick");
    if (c.max_delay < c.min_delay)
        bad("max delay must not be below min delay");
    if (!(c.duplicate_prob >= 0.0 && c.duplicate_prob <= 1.0))
        bad("duplicate probability must lie in [0, 1]");
    for (const auto& p : c.partitions) {
        if (p.end < p.start)
            bad("partition ends before it starts");
        for (auto r : p.isolated)
            if (r < 1 || r > c.replica_count)
                bad("partition isolates unknown replica " + std::to_string(r));
    }
}

void execute(Replica& r, const std::vector<Step>& steps, std::vector<ActionId>& open)
{
    try {
        for (const auto& s : steps) {
            std::visit(
                [&](const auto& st) {
                    using T = std::decay_t<decltype(st)>;
                    if constexpr (std::is_same_v<T, step::CreateSource>) {
                        r.create_source(st.initial, st.name);
                    } else if constexpr (std::is_same_v<T, step::CreateDerived>) {
                        r.create_derived(st.deps, st.function, st.name);
                    } else if constexpr (std::is_same_v<T, step::Begin>) {
                        open.push_back(r.begin_action(st.label, st.kind));
                    } else if constexpr (std::is_same_v<T, step::End>) {
                        if (open.empty())
                            throw Error(ErrorCode::InvalidWorkload, "end without an open action");
                        r.end_action(open.back());
                        open.pop_back();
                    } else if constexpr (std::is_same_v<T, step::Set>) {
                        r.set(st.signal, st.value);
                    } else if constexpr (std::is_same_v<T, step::Batch>) {
                        r.batch([&] {
                            for (const auto& set : st.sets)
                                r.set(set.signal, set.value);
                        });
                    } else if constexpr (std::is_same_v<T, step::Undo>) {
                        r.undo();
                    } else if constexpr (std::is_same_v<T, step::Redo>) {
                        r.redo();
                    } else if constexpr (std::is_same_v<T, step::Checkpoint>) {
                        r.checkpoint(st.label);
                    } else if constexpr (std::is_same_v<T, step::Path>) {
                        auto path = r.create_path(st.label);
                        std::optional<CheckpointId> last;
                        for (const auto& [id, _] : r.history().checkpoints())
                            if (id.replica == r.id())
                                last = id;
                        if (last)
                            r.append_step(path, *last);
                    }
                },
                s);
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidWorkload)
            throw;
        throw Error(ErrorCode::InvalidWorkload, "replica " + std::to_string(r.id()) + ": " + e.what());
    }
}

namespace {

std::string show(const Json& j)
{
    auto s = j.dump();
    return s.size() > 80 ? s.substr(0, 77) + "..." : s;
}

// First difference between two replicated-state documents.
std::string first_difference(const std::string& a, const std::string& b, ReplicaId ra, ReplicaId rb)
{
    if (a == b)
        return {};
    Json ja = Json::parse(a);
    Json jb = Json::parse(b);
    auto who = [&](const char* what) {
        return std::string(what) + " (replica " + std::to_string(ra) + " vs replica " + std::to_string(rb) + ")";
    };
    for (const char* key : {"signals", "values", "histories"}) {
        const auto& oa = ja[key];
        const auto& ob = jb[key];
        for (const auto& [name, v] : oa.items()) {
            if (!ob.contains(name))
                return who(key) + ": signal '" + name + "' missing on replica " + std::to_string(rb);
            if (v == ob[name])
                continue;
            if (std::string(key) == "histories") {
                const auto& hb = ob[name];
                std::size_t i = 0;
                while (i < v.size() && i < hb.size() && v[i] == hb[i])
                    ++i;
                return who(key) + ": history of signal '" + name + "' differs at entry " + std::to_string(i);
            }
            return who(key) + ": signal '" + name + "' is " + show(v) + " vs " + show(ob[name]);
        }
        for (const auto& [name, v] : ob.items())
            if (!oa.contains(name))
                return who(key) + ": signal '" + name + "' missing on replica " + std::to_string(ra);
    }
    for (const char* key : {"checkpoints", "paths"})
        if (ja[key] != jb[key])
            return who(key) + ": " + key + " differ";
    const auto& la = ja["log"];
    const auto& lb = jb["log"];
    std::size_t i = 0;
    while (i < la.size() && i < lb.size() && la[i] == lb[i])
        ++i;
    if (i < la.size() || i < lb.size())
        return who("shared action log") + ": first difference at position " + std::to_string(i);
    return who("state") + ": serialized states differ";
}

struct Clock {
    std::shared_ptr<std::uint64_t> now = std::make_shared<std::uint64_t>(0);
    WallClock wall() const
    {
        return [t = now] { return static_cast<WallTime>(*t); };
    }
};

} // namespace

SimReport run(const SimConfig& config, const Workload& workload)
{
    validate(config);
    for (const auto& item : workload.items)
        if (item.replica < 1 || item.replica > config.replica_count)
            throw Error(ErrorCode::InvalidWorkload, "work item targets unknown replica " + std::to_string(item.replica));

    std::vector<const WorkItem*> items;
    for (const auto& item : workload.items)
        items.push_back(&item);
    std::stable_sort(items.begin(), items.end(), [](const auto* a, const auto* b) { return a->tick < b->tick; });

    Clock clock;
    std::vector<Replica> replicas;
    std::vector<std::vector<ActionId>> open(config.replica_count);
    for (std::size_t i = 0; i < config.replica_count; ++i) {
        ReplicaOptions o;
        o.id = static_cast<ReplicaId>(i + 1);
        o.shared = true;
        o.clock = clock.wall();
        o.merge_fault = config.fault;
        replicas.emplace_back(std::move(o));
    }

    std::mt19937_64 rng(config.seed);
    auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    std::map<std::pair<std::uint64_t, std::uint64_t>, SimEvent> queue;
    std::uint64_t seq = 0;
    std::map<std::pair<ReplicaId, ReplicaId>, std::uint64_t> fifo;
    SimReport report;
    report.config = config;
    auto& stats = report.stats;
    std::uint64_t now = 0;

    auto broadcast = [&](Replica& from) {
        for (const auto& txn : from.take_outbox()) {
            ++stats.transactions;
            auto bytes = encode(txn);
            for (std::size_t j = 1; j <= config.replica_count; ++j) {
                auto to = static_cast<ReplicaId>(j);
                if (to == from.id())
                    continue;
                std::uint32_t copies = 1 + (uniform() < config.duplicate_prob ? 1 : 0);
                for (std::uint32_t c = 0; c < copies; ++c) {
                    auto at = now + config.min_delay + rng() % (config.max_delay - config.min_delay + 1);
                    if (!config.reorder) {
                        auto& last = fifo[{from.id(), to}];
                        at = std::max(at, last);
                        last = at;
                    }
                    queue.emplace(std::pair {at, seq++}, SimEvent {at, from.id(), to, bytes, c});
                    ++stats.messages;
                    if (c > 0)
                        ++stats.duplicates;
                }
            }
        }
    };

    auto cut = [&](ReplicaId a, ReplicaId b, std::uint64_t t) -> const Partition* {
        for (const auto& p : config.partitions) {
            if (t < p.start || t >= p.end)
                continue;
            bool ia = std::find(p.isolated.begin(), p.isolated.end(), a) != p.isolated.end();
            bool ib = std::find(p.isolated.begin(), p.isolated.end(), b) != p.isolated.end();
            if (ia != ib)
                return &p;
        }
        return nullptr;
    };

    std::size_t next_item = 0;
    for (;;) {
        *clock.now = now;
        while (!queue.empty() && queue.begin()->first.first == now) {
            auto node = queue.extract(queue.begin());
            auto& ev = node.mapped();
            if (const auto* p = cut(ev.from, ev.to, now)) {
                ev.deliver_at = p->end;
                node.key().first = p->end;
                queue.insert(std::move(node));
                ++stats.deferred;
                continue;
            }
            auto& to = replicas[ev.to - 1];
            to.apply_remote(std::span<const std::uint8_t>(ev.payload));
            ++stats.deliveries;
        }
        while (next_item < items.size() && items[next_item]->tick == now) {
            const auto& item = *items[next_item++];
            auto& r = replicas[item.replica - 1];
            execute(r, item.steps, open[item.replica - 1]);
            broadcast(r);
        }
        if (queue.empty() && next_item == items.size())
            break;
        auto next = std::numeric_limits<std::uint64_t>::max();
        if (!queue.empty())
            next = queue.begin()->first.first;
        if (next_item < items.size())
            next = std::min(next, items[next_item]->tick);
        if (next > config.max_ticks) {
            report.drained = false;
            break;
        }
        now = next;
    }
    stats.ticks = now;

    for (auto& r : replicas) {
        stats.max_buffer_depth = std::max(stats.max_buffer_depth, r.max_buffer_depth());
        ReplicaReport rr;
        rr.id = r.id();
        rr.state = r.replicated_state();
        rr.trace = r.trace_text();
        rr.log = r.shared_action_log();
        auto it = r.delivered().find(r.id());
        rr.top_level_actions = it == r.delivered().end() ? 0 : it->second;
        report.replicas.push_back(std::move(rr));
    }
    return report;
}

std::string SimReport::to_json() const
{
    Json parts = Json::array();
    for (const auto& p : config.partitions)
        parts.push_back(Json {{"start", p.start}, {"end", p.end}, {"isolated", p.isolated}});
    Json cfg {{"replicas", config.replica_count}, {"seed", config.seed}, {"min_delay", config.min_delay},
        {"max_delay", config.max_delay}, {"duplicate_prob", config.duplicate_prob}, {"reorder", config.reorder},
        {"partitions", std::move(parts)}, {"max_ticks", config.max_ticks},
        {"fault", config.fault == MergeFault::None ? "none" : "invert-lww"}};
    Json st {{"messages", stats.messages}, {"duplicates", stats.duplicates}, {"deliveries", stats.deliveries},
        {"deferred", stats.deferred}, {"transactions", stats.transactions}, {"max_buffer_depth", stats.max_buffer_depth},
        {"ticks", stats.ticks}};
    Json reps = Json::array();
    for (const auto& r : replicas) {
        Json log = Json::array();
        for (const auto& e : r.log)
            log.push_back(Json::array({e.order.str(), e.txn.str(), e.action.label, e.action.kind}));
        std::string digest;
        if (auto pos = r.trace.rfind("\"chk\":\""); pos != std::string::npos)
            digest = r.trace.substr(pos + 7, 16);
        std::size_t lines = static_cast<std::size_t>(std::count(r.trace.begin(), r.trace.end(), '\n'));
        reps.push_back(Json {{"id", r.id}, {"state", Json::parse(r.state)}, {"log", std::move(log)},
            {"top_level_actions", r.top_level_actions}, {"trace_records", lines}, {"trace_digest", digest}});
    }
    Json j {{"config", std::move(cfg)}, {"stats", std::move(st)}, {"drained", drained}, {"replicas", std::move(reps)}};
    return detail::dump(j);
}

Convergence assert_converged(const SimReport& report)
{
    if (!report.drained)
        throw Error(ErrorCode::SimNotDrained, "simulation stopped with messages still in flight");
    Convergence c;
    for (std::size_t i = 1; i < report.replicas.size(); ++i) {
        const auto& a = report.replicas[0];
        const auto& b = report.replicas[i];
        auto d = first_difference(a.state, b.state, a.id, b.id);
        if (!d.empty()) {
            c.converged = false;
            c.divergence = std::move(d);
            return c;
        }
    }
    return c;
}

namespace {

Replica tiny_replica(ReplicaId id)
{
    ReplicaOptions o;
    o.id = id;
    o.shared = true;
    o.clock = [] { return WallTime {0}; };
    return Replica(std::move(o));
}

// Rebuilds replica `id` up to the point where the other scripts'
// transactions arrive.
Replica rebuild(ReplicaId id, const TinyWorkload& w, const std::vector<Transaction>& setup_txns)
{
    auto r = tiny_replica(id);
    std::vector<ActionId> open;
    if (id == 1) {
        execute(r, w.setup, open);
    } else {
        for (const auto& t : setup_txns)
            if (r.apply_remote(t) != ApplyResult::Applied)
                throw Error(ErrorCode::InvalidWorkload, "setup transaction did not apply");
    }
    if (id <= w.scripts.size())
        execute(r, w.scripts[id - 1], open);
    if (!open.empty())
        throw Error(ErrorCode::InvalidWorkload, "script leaves an action open on replica " + std::to_string(id));
    r.take_outbox();
    return r;
}

} // namespace

ExhaustiveResult exhaustive_delivery_check(const TinyWorkload& w)
{
    if (w.replica_count < 1 || w.scripts.size() > w.replica_count)
        throw Error(ErrorCode::InvalidWorkload, "scripts must not outnumber replicas");

    std::vector<Transaction> setup_txns;
    std::vector<Transaction> txns;
    {
        auto first = tiny_replica(1);
        std::vector<ActionId> open;
        execute(first, w.setup, open);
        if (!open.empty())
            throw Error(ErrorCode::InvalidWorkload, "setup leaves an action open");
        setup_txns = first.take_outbox();
        for (std::size_t i = 0; i < w.scripts.size(); ++i) {
            auto id = static_cast<ReplicaId>(i + 1);
            auto r = id == 1 ? std::move(first) : tiny_replica(id);
            if (id != 1)
                for (const auto& t : setup_txns)
                    r.apply_remote(t);
            execute(r, w.scripts[i], open);
            if (!open.empty())
                throw Error(ErrorCode::InvalidWorkload, "script leaves an action open on replica " + std::to_string(id));
            for (auto& t : r.take_outbox())
                txns.push_back(std::move(t));
        }
    }
    if (txns.size() > kMaxExhaustiveTransactions)
        throw Error(ErrorCode::TooManyTransactions,
            std::to_string(txns.size()) + " transactions exceed the exhaustive limit of "
                + std::to_string(kMaxExhaustiveTransactions));

    ExhaustiveResult result;
    result.transactions = txns.size();
    std::optional<std::string> reference;
    ReplicaId reference_id = 0;
    auto observer = static_cast<ReplicaId>(w.replica_count + 1);
    for (ReplicaId target = 1; target <= observer; ++target) {
        if (target != observer && target > w.replica_count)
            continue;
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < txns.size(); ++i)
            if (txns[i].id.replica != target)
                order.push_back(i);
        do {
            bool legal = true;
            std::map<ReplicaId, std::uint64_t> last;
            for (auto i : order) {
                auto& seen = last[txns[i].id.replica];
                if (txns[i].id.seq < seen) {
                    legal = false;
                    break;
                }
                seen = txns[i].id.seq;
            }
            if (!legal)
                continue;
            auto r = rebuild(target, w, setup_txns);
            std::string trail;
            for (auto i : order) {
                trail += (trail.empty() ? "" : " ") + txns[i].id.str();
                if (r.apply_remote(txns[i]) != ApplyResult::Applied) {
                    result.ok = false;
                    result.divergence = "replica " + std::to_string(target) + ": " + txns[i].id.str()
                        + " was not applied in order [" + trail + "]";
                    return result;
                }
            }
            ++result.schedules;
            auto state = r.replicated_state();
            if (!reference) {
                reference = std::move(state);
                reference_id = target;
                continue;
            }
            auto d = first_difference(*reference, state, reference_id, target);
            if (!d.empty()) {
                result.ok = false;
                result.divergence = d + " after delivery order [" + trail + "]";
                return result;
            }
        } while (std::next_permutation(order.begin(), order.end()));
    }
    return result;
}

} // namespace sigtrace::sim
