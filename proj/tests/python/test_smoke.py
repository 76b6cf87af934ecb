import pytest

import sigtrace


def ticking(start=1000, step=10):
    t = [start - step]

    def clock():
        t[0] += step
        return t[0]

    return clock


def test_values_round_trip():
    r = sigtrace.Replica(clock=ticking())
    for name, v in [("n", None), ("b", True), ("i", 3), ("f", 2.5), ("s", "hi"), ("l", [1, "a", False]), ("m", {"k": [1.0]})]:
        r.create_source(v, name)
        assert r.get(name) == v
    assert isinstance(r.get("b"), bool)
    assert isinstance(r.get("i"), int) and not isinstance(r.get("i"), bool)


def test_derived_and_batch():
    r = sigtrace.Replica(clock=ticking())
    a = r.create_source(1, "a")
    b = r.create_source(2, "b")
    d = r.create_derived([a, b], "sum", "d")
    assert r.get(d) == 3

    def body():
        r.set(a, 10)
        r.set(b, 20)

    r.batch(body)
    assert r.get(d) == 30
    assert [e.value for e in r.history_of(d)] == [3, 30]


def test_python_compute_function():
    r = sigtrace.Replica(clock=ticking())
    r.register_function("double", lambda args: args[0] * 2)
    x = r.create_source(4, "x")
    y = r.create_derived([x], "double", "y")
    r.set(x, 5)
    assert r.get(y) == 10


def test_history_queries():
    r = sigtrace.Replica(clock=ticking())
    x = r.create_source(1, "x")
    s5 = r.set(x, 5)
    r.set(x, 9)
    h = r.history_of(x)
    assert [e.value for e in h] == [1, 5, 9]
    assert r.value_at(x, s5) == 5
    assert r.value_at_time(x, h[1].wall_time) == 5
    with pytest.raises(sigtrace.SigtraceError) as err:
        r.value_at_time(x, 0)
    assert err.value.code == "BeforeFirstEntry"


def test_actions_undo_redo():
    r = sigtrace.Replica(clock=ticking())
    x = r.create_source(1, "x")
    drag = r.begin_action("drag", "transform")
    r.set(x, 5)
    r.set(x, 9)
    block = r.end_action(drag)
    assert len(block.entries) == 2
    assert r.undo() == drag
    assert r.get(x) == 1
    assert r.redo() == drag
    assert r.get(x) == 9
    labels = [b.label for b in r.actions(top_level_only=True) if not b.implicit]
    assert labels == ["drag", "undo:drag", "redo:drag"]


def test_checkpoints_and_branches():
    r = sigtrace.Replica(clock=ticking())
    x = r.create_source(0, "x")
    v1 = r.checkpoint("v1")
    r.set(x, 2)
    v2 = r.checkpoint("v2")
    d = r.diff(v1, v2)
    assert [(c.signal, c.before, c.after) for c in d] == [("x", 0, 2)]
    r.branch_from(v1, "alt")
    assert r.get(x) == 0
    r.checkout(sigtrace.BranchId.parse("main"))
    assert r.get(x) == 2
    p = r.create_path("tour")
    r.append_step(p, v1)
    r.append_step(p, v2)
    assert r.list_paths()[0].steps == [v1, v2]


def test_replication():
    a = sigtrace.Replica(1, shared=True, clock=ticking())
    b = sigtrace.Replica(2, shared=True, clock=ticking())
    x = a.create_source("none", "x")
    for t in a.take_outbox():
        assert b.apply_remote(t) == "applied"
    a.set(x, "red")
    b.set(x, "blue")
    ta, tb = a.take_outbox(), b.take_outbox()
    for t in ta:
        b.apply_remote(t)
    for t in tb:
        a.apply_remote(t)
    assert a.get(x) == b.get(x) == "blue"
    assert a.replicated_state() == b.replicated_state()
    assert b.apply_remote(ta[0]) == "duplicate"
    assert [e["label"] for e in a.shared_action_log()] == [e["label"] for e in b.shared_action_log()]


def test_trace_replay_verify():
    r = sigtrace.demo_session(1)
    text = r.trace_text()
    assert sigtrace.verify(text) == []
    back = sigtrace.replay(text)
    assert back.trace_text() == text
    assert sigtrace.verify(text.replace('"version":1', '"version":1 ', 1)) != []


def test_simulate():
    out = sigtrace.simulate(replicas=3, seed=7, ops=100, duplicate=0.2, partitions=[(5, 20, [3])])
    assert out["converged"]
    assert out["actions"] > 0
    for t in out["traces"]:
        assert sigtrace.verify(t) == []


def test_errors_carry_codes():
    r = sigtrace.Replica(clock=ticking())
    with pytest.raises(sigtrace.SigtraceError) as err:
        r.get("missing")
    assert err.value.code == "UnknownSignal"
    with pytest.raises(sigtrace.SigtraceError) as err:
        sigtrace.replay("not json\n")
    assert err.value.code == "MalformedTrace"
    assert err.value.line == 1
