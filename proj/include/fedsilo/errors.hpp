#pragma once

#include <stdexcept>
#include <string>

namespace fedsilo {

enum class Err {
    // tensor-core
    NameNotFound,
    BadMagic,
    UnsupportedVersion,
    CorruptPayload,
    Truncated,
    // adapters
    TargetNotFound,
    TargetNotMatrix,
    ShapeMismatch,
    NameConventionViolation,
    // trainer
    LabelOutOfRange,
    NonFiniteGradient,
    EmptyShard,
    EmptyDataset,
    // partitioner
    NonPositiveAlpha,
    TooFewSamples,
    EmptyLabels,
    PlanLabelMismatch,
    // aggregator
    EmptyUpdateSet,
    SignatureMismatch,
    RoundMismatch,
    DuplicateUpdate,
    UnknownClient,
    // communicator
    StoreUnavailable,
    ObjectMissing,
    IntegrityFailure,
    EndpointUnknown,
    EndpointUnreachable,
    Timeout,
    MalformedHeader,
    LengthMismatch,
    BadKey,
    DuplicateTask,
    // federation
    DuplicateMember,
    NotAMember,
    DuplicateName,
    SourceUnreadable,
    SchemaMismatch,
    // taskdata
    MissingField,
    UnknownDatasetKind,
    BadGeneratorParams,
    // orchestrator
    RoundTimeout,
    AggregationError,
    BadConfig,
};

const char* err_name(Err code);

// Single exception type carrying a machine-checkable code plus context.
class Error : public std::runtime_error {
public:
    Error(Err code, const std::string& detail)
        : std::runtime_error(std::string(err_name(code)) + ": " + detail), code_(code) {}

    Err code() const noexcept { return code_; }

private:
    Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& detail) {
    throw Error(code, detail);
}

} // namespace fedsilo
