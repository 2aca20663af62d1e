#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace forkscope {

enum class ErrorCode {
    // ingest
    UnreadableSource,
    MalformedFixture,
    CycleDetected,
    UnknownCommit,
    TruncatedAncestry,
    NetworkFailure,
    SchemaMismatch,
    RateLimitExceeded,
    // analysis
    EmptyHistory,
    InvalidInput,
    TooFewVectors,
    KTooLarge,
    KTooSmall,
    LabelLengthMismatch,
    NoEligibleFiles,
    EmptyInput,
    TooFewScores,
    NoParentCommitsInWindow,
    DuplicateFinding,
    DuplicateRegistryEntry,
    LengthMismatch,
    ZeroVariance,
    TooFewGroups,
    EmptyGroup,
    // pipeline
    ConfigInvalid,
    StageDependencyMissing,
    StageFailed,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure surfaced by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace forkscope
