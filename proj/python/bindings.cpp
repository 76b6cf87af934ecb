// Python bindings for the sigtrace library (module sigtrace._core).

#include "sigtrace/error.hpp"
#include "sigtrace/netsim.hpp"
#include "sigtrace/replay.hpp"
#include "sigtrace/replica.hpp"
#include "sigtrace/workloads.hpp"

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace sigtrace;

namespace {

Value to_value(const py::handle& o)
{
    if (o.is_none())
        return Value();
    // bool before int: Python bools are ints.
    if (py::isinstance<py::bool_>(o))
        return Value(o.cast<bool>());
    if (py::isinstance<py::int_>(o))
        return Value(o.cast<std::int64_t>());
    if (py::isinstance<py::float_>(o))
        return Value(o.cast<double>());
    if (py::isinstance<py::str>(o))
        return Value(o.cast<std::string>());
    if (py::isinstance<py::dict>(o)) {
        Value::Map m;
        for (auto [k, v] : o.cast<py::dict>()) {
            if (!py::isinstance<py::str>(k))
                throw py::type_error("map keys must be str");
            m.emplace(k.cast<std::string>(), to_value(v));
        }
        return Value(std::move(m));
    }
    if (py::isinstance<py::list>(o) || py::isinstance<py::tuple>(o)) {
        Value::List l;
        for (auto item : o)
            l.push_back(to_value(item));
        return Value(std::move(l));
    }
    throw py::type_error("unsupported value type: " + std::string(py::str(py::type::of(o))));
}

py::object from_value(const Value& v)
{
    switch (v.kind()) {
    case Value::Kind::Null:
        return py::none();
    case Value::Kind::Bool:
        return py::bool_(v.as_bool());
    case Value::Kind::Int:
        return py::int_(v.as_int());
    case Value::Kind::Float:
        return py::float_(v.as_float());
    case Value::Kind::String:
        return py::str(v.as_string());
    case Value::Kind::List: {
        py::list l;
        for (const auto& item : v.as_list())
            l.append(from_value(item));
        return std::move(l);
    }
    case Value::Kind::Map: {
        py::dict d;
        for (const auto& [k, item] : v.as_map())
            d[py::str(k)] = from_value(item);
        return std::move(d);
    }
    }
    return py::none();
}

std::vector<SignalId> signal_ids(const std::vector<std::string>& names)
{
    std::vector<SignalId> out;
    for (const auto& n : names)
        out.push_back(SignalId {n});
    return out;
}

ComputeFn python_function(py::function fn)
{
    return [fn = std::move(fn)](std::span<const Value> args) {
        py::gil_scoped_acquire gil;
        py::list l;
        for (const auto& a : args)
            l.append(from_value(a));
        return to_value(fn(l));
    };
}

template <class Id> void bind_id(py::module_& m, const char* name)
{
    py::class_<Id>(m, name)
        .def_static("parse", [](const std::string& s) { return Id::parse(s); })
        .def("__str__", &Id::str)
        .def("__repr__", [name](const Id& id) { return std::string(name) + "('" + id.str() + "')"; })
        .def("__eq__", [](const Id& a, const Id& b) { return a == b; })
        .def("__lt__", [](const Id& a, const Id& b) { return a < b; })
        .def("__hash__", [](const Id& id) { return py::hash(py::str(id.str())); });
}

py::dict descriptor_dict(const ActionDescriptor& d)
{
    py::list children;
    for (const auto& c : d.children)
        children.append(descriptor_dict(c));
    py::dict out;
    out["id"] = d.id;
    out["label"] = d.label;
    out["kind"] = d.kind;
    out["implicit"] = d.implicit;
    out["reverts"] = d.reverts ? py::cast(*d.reverts) : py::none();
    out["opened"] = d.opened;
    out["closed"] = d.closed;
    out["children"] = children;
    return out;
}

Replica make_replica(ReplicaId id, bool shared, std::optional<std::function<WallTime()>> clock)
{
    ReplicaOptions o;
    o.id = id;
    o.shared = shared;
    if (clock) {
        auto fn = std::move(*clock);
        o.clock = [fn] {
            py::gil_scoped_acquire gil;
            return fn();
        };
    }
    return Replica(std::move(o));
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Reactive signals with persistent histories, semantic actions and replication";

    static PyObject* error = PyErr_NewException("sigtrace._core.SigtraceError", PyExc_RuntimeError, nullptr);
    m.attr("SigtraceError") = py::handle(error);
    py::register_exception_translator([](std::exception_ptr p) {
        auto raise = [](const Error& e, py::object line) {
            py::object exc = py::reinterpret_borrow<py::object>(error)(py::str(e.what()));
            exc.attr("code") = std::string(to_string(e.code()));
            exc.attr("line") = std::move(line);
            PyErr_SetObject(error, exc.ptr());
        };
        try {
            if (p)
                std::rethrow_exception(p);
        } catch (const TraceError& e) {
            raise(e, py::int_(e.line()));
        } catch (const Error& e) {
            raise(e, py::none());
        }
    });

    py::class_<VersionStamp>(m, "VersionStamp")
        .def(py::init([](std::uint64_t l, ReplicaId r) { return VersionStamp {l, r}; }), py::arg("lamport"),
            py::arg("replica"))
        .def_readonly("lamport", &VersionStamp::lamport)
        .def_readonly("replica", &VersionStamp::replica)
        .def_static("parse", [](const std::string& s) { return VersionStamp::parse(s); })
        .def("__str__", &VersionStamp::str)
        .def("__repr__", [](const VersionStamp& s) { return "VersionStamp('" + s.str() + "')"; })
        .def("__eq__", [](const VersionStamp& a, const VersionStamp& b) { return a == b; })
        .def("__lt__", [](const VersionStamp& a, const VersionStamp& b) { return a < b; })
        .def("__le__", [](const VersionStamp& a, const VersionStamp& b) { return !(b < a); })
        .def("__hash__", [](const VersionStamp& s) { return py::hash(py::str(s.str())); });
    bind_id<ActionId>(m, "ActionId");
    bind_id<CheckpointId>(m, "CheckpointId");
    bind_id<PathId>(m, "PathId");
    bind_id<BranchId>(m, "BranchId");
    bind_id<TxnId>(m, "TxnId");

    py::class_<HistoryEntry>(m, "HistoryEntry")
        .def_property_readonly("signal", [](const HistoryEntry& e) { return e.signal.name; })
        .def_readonly("stamp", &HistoryEntry::stamp)
        .def_property_readonly("value", [](const HistoryEntry& e) { return from_value(e.value); })
        .def_readonly("wall_time", &HistoryEntry::wall_time)
        .def_readonly("action", &HistoryEntry::action)
        .def_property_readonly("origin", [](const HistoryEntry& e) { return std::string(to_string(e.origin)); })
        .def_readonly("branch", &HistoryEntry::branch)
        .def("__repr__", [](const HistoryEntry& e) {
            return "HistoryEntry(" + e.signal.name + "@" + e.stamp.str() + " = " + e.value.to_display() + ")";
        });

    py::class_<ActionBlock>(m, "ActionBlock")
        .def_readonly("id", &ActionBlock::id)
        .def_readonly("label", &ActionBlock::label)
        .def_readonly("kind", &ActionBlock::kind)
        .def_readonly("parent", &ActionBlock::parent)
        .def_readonly("children", &ActionBlock::children)
        .def_readonly("started_at", &ActionBlock::started_at)
        .def_readonly("ended_at", &ActionBlock::ended_at)
        .def_readonly("opened", &ActionBlock::opened)
        .def_readonly("closed", &ActionBlock::closed)
        .def_readonly("entries", &ActionBlock::entries)
        .def_readonly("origin_replica", &ActionBlock::origin_replica)
        .def_readonly("implicit", &ActionBlock::implicit)
        .def_readonly("reverts", &ActionBlock::reverts)
        .def("__repr__", [](const ActionBlock& b) {
            return "ActionBlock(" + b.id.str() + " " + b.label + ", " + std::to_string(b.entries.size()) + " entries)";
        });

    py::class_<SignalDiff>(m, "SignalDiff")
        .def_property_readonly("signal", [](const SignalDiff& d) { return d.signal.name; })
        .def_property_readonly("before", [](const SignalDiff& d) { return d.before ? from_value(*d.before) : py::none(); })
        .def_property_readonly("after", [](const SignalDiff& d) { return d.after ? from_value(*d.after) : py::none(); })
        .def_property_readonly("before_present", [](const SignalDiff& d) { return d.before.has_value(); })
        .def_property_readonly("after_present", [](const SignalDiff& d) { return d.after.has_value(); });

    py::class_<ExplorationPath>(m, "ExplorationPath")
        .def_readonly("id", &ExplorationPath::id)
        .def_readonly("label", &ExplorationPath::label)
        .def_property_readonly("steps", &ExplorationPath::step_list);

    py::class_<Replica>(m, "Replica")
        .def(py::init(&make_replica), py::arg("id") = 1, py::arg("shared") = false, py::arg("clock") = py::none(),
            "A document replica. `clock` returns wall time in milliseconds.")
        .def_property_readonly("id", &Replica::id)
        .def_property_readonly("shared", &Replica::shared)
        .def_property_readonly("lamport", &Replica::lamport)
        .def_property_readonly("historical", &Replica::historical)
        .def(
            "register_function",
            [](Replica& r, std::string name, py::function fn) { r.functions().add(std::move(name), python_function(fn)); },
            py::arg("name"), py::arg("fn"))
        .def(
            "create_source",
            [](Replica& r, py::object initial, std::optional<std::string> name) {
                return r.create_source(to_value(initial), std::move(name)).name;
            },
            py::arg("initial"), py::arg("name") = py::none())
        .def(
            "create_derived",
            [](Replica& r, const std::vector<std::string>& deps, std::string fn, std::optional<std::string> name) {
                return r.create_derived(signal_ids(deps), std::move(fn), std::move(name)).name;
            },
            py::arg("deps"), py::arg("function"), py::arg("name") = py::none())
        .def(
            "set", [](Replica& r, const std::string& s, py::object v) { return r.set(SignalId {s}, to_value(v)); },
            py::arg("signal"), py::arg("value"))
        .def(
            "get", [](const Replica& r, const std::string& s) { return from_value(r.get(SignalId {s})); },
            py::arg("signal"))
        .def(
            "batch", [](Replica& r, const std::function<void()>& body) { r.batch(body); }, py::arg("body"),
            "Runs body() with propagation deferred to its end.")
        .def("signals",
            [](const Replica& r) {
                std::vector<std::string> out;
                for (const auto& s : r.signals())
                    out.push_back(s.name);
                return out;
            })
        .def("has_signal", [](const Replica& r, const std::string& s) { return r.has_signal(SignalId {s}); })
        .def("recompute_count", [](const Replica& r, const std::string& s) { return r.recompute_count(SignalId {s}); })
        .def("history_of", [](const Replica& r, const std::string& s) { return r.history_of(SignalId {s}); })
        .def("value_at",
            [](const Replica& r, const std::string& s, const VersionStamp& at) {
                return from_value(r.value_at(SignalId {s}, at));
            })
        .def("value_at_time",
            [](const Replica& r, const std::string& s, WallTime at) { return from_value(r.value_at_time(SignalId {s}, at)); })
        .def("checkpoint", &Replica::checkpoint, py::arg("label"))
        .def("branch_from", &Replica::branch_from, py::arg("checkpoint"), py::arg("label"))
        .def("checkout", &Replica::checkout, py::arg("branch"))
        .def_property_readonly("current_branch", &Replica::current_branch)
        .def("diff", &Replica::diff, py::arg("a"), py::arg("b"))
        .def("create_path", &Replica::create_path, py::arg("label"))
        .def("append_step", &Replica::append_step, py::arg("path"), py::arg("checkpoint"))
        .def("list_paths", &Replica::list_paths)
        .def("begin_action", &Replica::begin_action, py::arg("label"), py::arg("kind"))
        .def("end_action", &Replica::end_action, py::arg("id"))
        .def(
            "actions",
            [](const Replica& r, std::optional<std::string> kind, std::optional<std::string> label,
                std::optional<WallTime> since, std::optional<WallTime> until, bool top_level_only) {
                ActionFilter f;
                f.kind = std::move(kind);
                f.label = std::move(label);
                f.from = since;
                f.to = until;
                f.top_level_only = top_level_only;
                return r.actions(f);
            },
            py::arg("kind") = py::none(), py::arg("label") = py::none(), py::arg("since") = py::none(),
            py::arg("until") = py::none(), py::arg("top_level_only") = false)
        .def("undo", &Replica::undo)
        .def("redo", &Replica::redo)
        .def("can_undo", &Replica::can_undo)
        .def("can_redo", &Replica::can_redo)
        .def("take_outbox",
            [](Replica& r) {
                py::list out;
                for (const auto& t : r.take_outbox()) {
                    auto bytes = encode(t);
                    out.append(py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
                }
                return out;
            })
        .def(
            "apply_remote",
            [](Replica& r, const py::bytes& b) {
                std::string s = b;
                auto res = r.apply_remote(
                    std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
                return std::string(to_string(static_cast<record::DeliverResult>(res)));
            },
            py::arg("txn"))
        .def("shared_action_log",
            [](const Replica& r) {
                py::list out;
                for (const auto& e : r.shared_action_log()) {
                    py::dict d = descriptor_dict(e.action);
                    d["txn"] = e.txn;
                    d["order"] = e.order;
                    out.append(d);
                }
                return out;
            })
        .def_property_readonly("buffered_count", &Replica::buffered_count)
        .def("trace_text", &Replica::trace_text)
        .def("snapshot", &Replica::snapshot)
        .def("replicated_state", &Replica::replicated_state)
        .def("check_invariants", &Replica::check_invariants);

    m.def(
        "replay",
        [](const std::string& text, std::optional<VersionStamp> upto) {
            return replay(parse_trace(text), FunctionRegistry::with_builtins(), upto);
        },
        py::arg("text"), py::arg("upto") = py::none(), "Rebuilds a replica from trace text.");
    m.def(
        "verify", [](const std::string& text) { return verify(text); }, py::arg("text"),
        "Diagnostics for a trace; empty when it verifies.");
    m.def("demo_session", &workloads::demo_session, py::arg("seed"), py::arg("actions") = workloads::kDefaultDemoActions);
    m.def(
        "simulate",
        [](std::size_t replicas, std::uint64_t seed, std::size_t ops, double duplicate, bool reorder,
            std::vector<std::tuple<std::uint64_t, std::uint64_t, std::vector<ReplicaId>>> partitions) {
            sim::SimConfig c;
            c.replica_count = replicas;
            c.seed = seed;
            c.duplicate_prob = duplicate;
            c.reorder = reorder;
            for (auto& [start, end, isolated] : partitions)
                c.partitions.push_back(sim::Partition {start, end, std::move(isolated)});
            workloads::SimWorkloadOptions wo;
            wo.replicas = replicas;
            wo.seed = seed;
            wo.ops = ops;
            auto report = sim::run(c, workloads::generate_sim_workload(wo));
            auto verdict = sim::assert_converged(report);
            py::dict out;
            out["converged"] = verdict.converged;
            out["divergence"] = verdict.divergence;
            out["report"] = report.to_json();
            py::list traces;
            for (const auto& rr : report.replicas)
                traces.append(rr.trace);
            out["traces"] = traces;
            out["actions"] = report.replicas.front().log.size();
            return out;
        },
        py::arg("replicas") = 3, py::arg("seed") = 1, py::arg("ops") = 200, py::arg("duplicate") = 0.0,
        py::arg("reorder") = true, py::arg("partitions") = std::vector<std::tuple<std::uint64_t, std::uint64_t, std::vector<ReplicaId>>> {});
}
