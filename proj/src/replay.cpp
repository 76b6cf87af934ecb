#include "sigtrace/replay.hpp"

#include "internal.hpp"
#include "sigtrace/error.hpp"

#include <memory>

namespace sigtrace {

namespace detail {

class Replayer {
public:
    Replayer(const Trace& trace, const FunctionRegistry& functions)
        : trace_(trace)
        , time_(std::make_shared<WallTime>(0))
        , replica_(ReplicaOptions {trace.header.replica, trace.header.shared, [t = time_] { return *t; }, functions})
    {
    }

    Replica run(std::optional<VersionStamp> upto, WallClock clock)
    {
        const auto& events = trace_.events;
        if (upto) {
            std::optional<std::size_t> last;
            for (std::size_t i = 0; i < events.size(); ++i)
                if (stamp_of(events[i]) == upto)
                    last = i;
            if (!last)
                throw Error(ErrorCode::UnknownStamp, "no record carries stamp " + upto->str());
            replica_.halt_after_ = *last + 1;
        }
        try {
            while (replica_.events_.size() < events.size()) {
                auto pos = replica_.events_.size();
                step(pos, events[pos]);
                if (!replica_.batch_.open)
                    compare(false);
            }
            if (replica_.batch_.open)
                throw TraceError(ErrorCode::MalformedTrace, events.size() + 1, "trace ends inside a batch");
            compare(false);
        } catch (const ReplayHalt&) {
            compare(true);
        }
        replica_.halt_after_.reset();
        replica_.options_.clock = std::move(clock);
        return std::move(replica_);
    }

private:
    static std::size_t line_of(std::size_t index) { return index + 2; }

    bool local(VersionStamp s) const { return s.replica == trace_.header.replica; }

    void open_batch(BatchMark mark)
    {
        if (mark != BatchMark::None && !replica_.batch_.open)
            replica_.begin_batch_scope();
    }

    void close_batch(BatchMark mark)
    {
        if (mark == BatchMark::Close)
            replica_.end_batch_scope();
    }

    [[noreturn]] void unexpected(std::size_t pos, const TraceEvent& ev)
    {
        auto s = stamp_of(ev);
        if (s && local(*s) && s->lamport > replica_.lamport() + 1)
            throw TraceError(ErrorCode::MalformedTrace, line_of(pos),
                "stamp gap: replay is at lamport " + std::to_string(replica_.lamport()) + " but the trace jumps to "
                    + s->str() + " (a record is missing)");
        throw TraceError(ErrorCode::MalformedTrace, line_of(pos),
            "unexpected " + std::string(type_name(ev)) + " record: no recorded operation produces it here");
    }

    void step(std::size_t pos, const TraceEvent& ev)
    {
        *time_ = wall_time_of(ev);
        auto& r = replica_;
        try {
            std::visit(
                [&](const auto& rec) {
                    using T = std::decay_t<decltype(rec)>;
                    if constexpr (std::is_same_v<T, record::DeclareSource>) {
                        if (!local(rec.stamp))
                            unexpected(pos, ev);
                        open_batch(rec.batch);
                        r.create_source(rec.value, rec.signal.name);
                        close_batch(rec.batch);
                    } else if constexpr (std::is_same_v<T, record::DeclareDerived>) {
                        if (!local(rec.stamp))
                            unexpected(pos, ev);
                        r.create_derived(rec.deps, rec.function, rec.signal.name);
                    } else if constexpr (std::is_same_v<T, record::Entry>) {
                        if (!local(rec.stamp) || rec.origin != Origin::Source)
                            unexpected(pos, ev);
                        open_batch(rec.batch);
                        r.set(rec.signal, rec.value);
                        close_batch(rec.batch);
                    } else if constexpr (std::is_same_v<T, record::ActionBegin>) {
                        if (!local(rec.stamp))
                            unexpected(pos, ev);
                        if (rec.reverts && rec.kind == "undo")
                            r.undo();
                        else if (rec.reverts && rec.kind == "redo")
                            r.redo();
                        else
                            r.begin_action(rec.label, rec.kind);
                    } else if constexpr (std::is_same_v<T, record::ActionEnd>) {
                        if (rec.implicit || rec.reverts || rec.origin != trace_.header.replica)
                            unexpected(pos, ev);
                        r.end_action(rec.action);
                    } else if constexpr (std::is_same_v<T, record::Checkpoint>) {
                        if (!local(rec.stamp))
                            unexpected(pos, ev);
                        r.checkpoint(rec.label);
                    } else if constexpr (std::is_same_v<T, record::Branch>) {
                        if (rec.op == record::Branch::Kind::Fork) {
                            if (!rec.checkpoint)
                                throw Error(ErrorCode::MalformedTrace, "fork record without a checkpoint");
                            r.branch_from(*rec.checkpoint, rec.label);
                        } else {
                            r.checkout(rec.branch);
                        }
                    } else if constexpr (std::is_same_v<T, record::Path>) {
                        if (!local(rec.stamp))
                            unexpected(pos, ev);
                        open_batch(rec.batch);
                        if (rec.op == record::Path::Kind::Create) {
                            r.create_path(rec.label);
                        } else {
                            if (!rec.checkpoint)
                                throw Error(ErrorCode::MalformedTrace, "step record without a checkpoint");
                            r.append_step(rec.path, *rec.checkpoint);
                        }
                        close_batch(rec.batch);
                    } else if constexpr (std::is_same_v<T, record::TxnCommit>) {
                        unexpected(pos, ev);
                    } else if constexpr (std::is_same_v<T, record::TxnDeliver>) {
                        r.apply_remote(std::span<const std::uint8_t>(rec.bytes));
                    }
                },
                ev);
        } catch (const TraceError&) {
            throw;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::MissingComputeFunction)
                throw;
            throw TraceError(ErrorCode::MalformedTrace, line_of(pos),
                "replaying " + std::string(type_name(ev)) + " failed: " + e.what());
        }
        if (r.events_.size() == pos && !r.batch_.open)
            unexpected(pos, ev);
    }

    // Checks regenerated records against the trace from the last checked
    // position onward. After a halt the final record may still carry an
    // open batch mark that the original later closed.
    void compare(bool halted)
    {
        const auto& mine = replica_.events_;
        const auto& theirs = trace_.events;
        for (; checked_ < mine.size(); ++checked_) {
            if (checked_ >= theirs.size())
                throw TraceError(ErrorCode::MalformedTrace, theirs.size() + 1,
                    "trace ends early: replay produces a further " + std::string(type_name(mine[checked_]))
                        + " record");
            TraceEvent expected = mine[checked_];
            if (halted && checked_ + 1 == mine.size())
                std::visit(
                    [&](auto& r) {
                        if constexpr (requires { r.batch; })
                            r.batch = std::visit(
                                [](const auto& o) {
                                    if constexpr (requires { o.batch; })
                                        return o.batch;
                                    else
                                        return BatchMark::None;
                                },
                                theirs[checked_]);
                    },
                    expected);
            if (expected == theirs[checked_])
                continue;
            auto want = stamp_of(expected);
            auto got = stamp_of(theirs[checked_]);
            std::string what;
            if (want && got && *want < *got)
                what = "stamp gap: replay produces " + want->str() + " but the trace jumps to " + got->str()
                    + " (a record is missing)";
            else
                what = "record differs from replay; expected " + serialize_event(expected);
            throw TraceError(ErrorCode::MalformedTrace, line_of(checked_), what);
        }
    }

    const Trace& trace_;
    std::shared_ptr<WallTime> time_;
    Replica replica_;
    std::size_t checked_ = 0;
};

} // namespace detail

Replica replay(const Trace& trace, const FunctionRegistry& functions, std::optional<VersionStamp> upto, WallClock clock)
{
    detail::Replayer replayer(trace, functions);
    return replayer.run(upto, std::move(clock));
}

std::vector<std::string> verify(std::string_view text, const FunctionRegistry& functions)
{
    std::vector<std::string> failures;
    Trace trace;
    try {
        trace = parse_trace(text);
    } catch (const Error& e) {
        failures.push_back(std::string("malformed trace: ") + e.what());
        return failures;
    }
    if (auto line = first_integrity_failure(text))
        failures.push_back("integrity: line " + std::to_string(*line)
            + ": digest chain broken (a record was edited, removed or reordered at or before this line)");
    try {
        auto replica = replay(trace, functions);
        auto text2 = serialize_trace(trace.header, replica.events());
        if (text2 != text) {
            std::size_t line = 1;
            std::size_t n = std::min(text.size(), text2.size());
            for (std::size_t i = 0; i < n && text[i] == text2[i]; ++i)
                if (text[i] == '\n')
                    ++line;
            failures.push_back("re-serialization: output differs from input at line " + std::to_string(line));
        }
        for (auto& v : replica.check_invariants())
            failures.push_back("invariant: " + v);
    } catch (const Error& e) {
        failures.push_back(std::string("replay: ") + e.what());
    }
    return failures;
}

} // namespace sigtrace
