#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sigtrace {

enum class ErrorCode {
    DuplicateName,
    UnknownSignal,
    CycleDetected,
    DerivedNotSettable,
    NestedBatch,
    BeforeFirstEntry,
    OpenScope,
    UnknownCheckpoint,
    UnknownBranch,
    UnknownPath,
    BranchingNotSupportedInSharedMode,
    NotInnermost,
    UnknownAction,
    NotShared,
    MalformedTransaction,
    ConflictingDeclaration,
    MissingComputeFunction,
    TypeMismatch,
    MalformedTrace,
    UnsupportedVersion,
    UnknownStamp,
    IoFailure,
    HistoricalSnapshot,
    InvalidWorkload,
    SimNotDrained,
    TooManyTransactions,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what);

    ErrorCode code() const noexcept { return code_; }
    // Message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

// Trace parse failures carry the 1-based line they were detected on.
class TraceError : public Error {
public:
    TraceError(ErrorCode code, std::size_t line, const std::string& what);

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace sigtrace
