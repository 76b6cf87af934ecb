#pragma once

#include "sigtrace/functions.hpp"
#include "sigtrace/replica.hpp"
#include "sigtrace/trace.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sigtrace {

/// Rebuilds a replica by re-executing the operations a trace records and
/// checking every record the replica regenerates against the trace.
///
/// With `upto`, execution stops right after the last record carrying that
/// stamp and the result is historical(). Throws TraceError(MalformedTrace)
/// with the offending line when the trace disagrees with re-execution,
/// Error(MissingComputeFunction) for an unregistered derived function,
/// and Error(UnknownStamp) when `upto` names no record.
///
/// `clock` becomes the replica's wall clock once replay is done.
Replica replay(const Trace& trace, const FunctionRegistry& functions = FunctionRegistry::with_builtins(),
    std::optional<VersionStamp> upto = std::nullopt, WallClock clock = system_wall_time);

/// Full check of a trace file's text: structure, digest chain, replay,
/// byte-identical re-serialization and replica invariants. Returns one
/// diagnostic per failure; empty means the trace verified.
std::vector<std::string> verify(std::string_view text, const FunctionRegistry& functions = FunctionRegistry::with_builtins());

} // namespace sigtrace
