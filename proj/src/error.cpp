#include "forkscope/error.hpp"

namespace forkscope {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::UnreadableSource: return "UnreadableSource";
        case ErrorCode::MalformedFixture: return "MalformedFixture";
        case ErrorCode::CycleDetected: return "CycleDetected";
        case ErrorCode::UnknownCommit: return "UnknownCommit";
        case ErrorCode::TruncatedAncestry: return "TruncatedAncestry";
        case ErrorCode::NetworkFailure: return "NetworkFailure";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::RateLimitExceeded: return "RateLimitExceeded";
        case ErrorCode::EmptyHistory: return "EmptyHistory";
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::TooFewVectors: return "TooFewVectors";
        case ErrorCode::KTooLarge: return "KTooLarge";
        case ErrorCode::KTooSmall: return "KTooSmall";
        case ErrorCode::LabelLengthMismatch: return "LabelLengthMismatch";
        case ErrorCode::NoEligibleFiles: return "NoEligibleFiles";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::TooFewScores: return "TooFewScores";
        case ErrorCode::NoParentCommitsInWindow: return "NoParentCommitsInWindow";
        case ErrorCode::DuplicateFinding: return "DuplicateFinding";
        case ErrorCode::DuplicateRegistryEntry: return "DuplicateRegistryEntry";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::ZeroVariance: return "ZeroVariance";
        case ErrorCode::TooFewGroups: return "TooFewGroups";
        case ErrorCode::EmptyGroup: return "EmptyGroup";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
        case ErrorCode::StageDependencyMissing: return "StageDependencyMissing";
        case ErrorCode::StageFailed: return "StageFailed";
    }
    return "Unknown";
}

}  // namespace forkscope
