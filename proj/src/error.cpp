#include "sigtrace/error.hpp"

namespace sigtrace {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::UnknownSignal: return "UnknownSignal";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::DerivedNotSettable: return "DerivedNotSettable";
    case ErrorCode::NestedBatch: return "NestedBatch";
    case ErrorCode::BeforeFirstEntry: return "BeforeFirstEntry";
    case ErrorCode::OpenScope: return "OpenScope";
    case ErrorCode::UnknownCheckpoint: return "UnknownCheckpoint";
    case ErrorCode::UnknownBranch: return "UnknownBranch";
    case ErrorCode::UnknownPath: return "UnknownPath";
    case ErrorCode::BranchingNotSupportedInSharedMode: return "BranchingNotSupportedInSharedMode";
    case ErrorCode::NotInnermost: return "NotInnermost";
    case ErrorCode::UnknownAction: return "UnknownAction";
    case ErrorCode::NotShared: return "NotShared";
    case ErrorCode::MalformedTransaction: return "MalformedTransaction";
    case ErrorCode::ConflictingDeclaration: return "ConflictingDeclaration";
    case ErrorCode::MissingComputeFunction: return "MissingComputeFunction";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::MalformedTrace: return "MalformedTrace";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::UnknownStamp: return "UnknownStamp";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::HistoricalSnapshot: return "HistoricalSnapshot";
    case ErrorCode::InvalidWorkload: return "InvalidWorkload";
    case ErrorCode::SimNotDrained: return "SimNotDrained";
    case ErrorCode::TooManyTransactions: return "TooManyTransactions";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what)
    , code_(code)
    , detail_(what)
{
}

TraceError::TraceError(ErrorCode code, std::size_t line, const std::string& what)
    : Error(code, "line " + std::to_string(line) + ": " + what)
    , line_(line)
{
}

} // namespace sigtrace
