#pragma once

#include "sigtrace/error.hpp"
#include "sigtrace/replica.hpp"

#include <doctest.h>

#include <memory>

namespace testing {

using namespace sigtrace;

// Clock advancing by `step` ms on every read.
inline WallClock ticking_clock(WallTime start = 1000, WallTime step = 10)
{
    auto t = std::make_shared<WallTime>(start - step);
    return [t, step] { return *t += step; };
}

inline Replica local(ReplicaId id = 1)
{
    ReplicaOptions o;
    o.id = id;
    o.clock = ticking_clock();
    return Replica(std::move(o));
}

inline Replica shared(ReplicaId id, MergeFault fault = MergeFault::None)
{
    ReplicaOptions o;
    o.id = id;
    o.shared = true;
    o.clock = ticking_clock();
    o.merge_fault = fault;
    return Replica(std::move(o));
}

inline std::vector<Value> values_of(const Replica& r, const SignalId& s)
{
    std::vector<Value> out;
    for (const auto& e : r.history_of(s))
        out.push_back(e.value);
    return out;
}

template <class F> ErrorCode code_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::IoFailure;
}

} // namespace testing

#define CHECK_CODE(expr, code) CHECK(::testing::code_of([&] { (void)(expr); }) == ::sigtrace::ErrorCode::code)
