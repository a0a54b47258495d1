#include "fedsilo/errors.hpp"

namespace fedsilo {

const char* err_name(Err code) {
    switch (code) {
    case Err::NameNotFound: return "NameNotFound";
    case Err::BadMagic: return "BadMagic";
    case Err::UnsupportedVersion: return "UnsupportedVersion";
    case Err::CorruptPayload: return "CorruptPayload";
    case Err::Truncated: return "Truncated";
    case Err::TargetNotFound: return "TargetNotFound";
    case Err::TargetNotMatrix: return "TargetNotMatrix";
    case Err::ShapeMismatch: return "ShapeMismatch";
    case Err::NameConventionViolation: return "NameConventionViolation";
    case Err::LabelOutOfRange: return "LabelOutOfRange";
    case Err::NonFiniteGradient: return "NonFiniteGradient";
    case Err::EmptyShard: return "EmptyShard";
    case Err::EmptyDataset: return "EmptyDataset";
    case Err::NonPositiveAlpha: return "NonPositiveAlpha";
    case Err::TooFewSamples: return "TooFewSamples";
    case Err::EmptyLabels: return "EmptyLabels";
    case Err::PlanLabelMismatch: return "PlanLabelMismatch";
    case Err::EmptyUpdateSet: return "EmptyUpdateSet";
    case Err::SignatureMismatch: return "SignatureMismatch";
    case Err::RoundMismatch: return "RoundMismatch";
    case Err::DuplicateUpdate: return "DuplicateUpdate";
    case Err::UnknownClient: return "UnknownClient";
    case Err::StoreUnavailable: return "StoreUnavailable";
    case Err::ObjectMissing: return "ObjectMissing";
    case Err::IntegrityFailure: return "IntegrityFailure";
    case Err::EndpointUnknown: return "EndpointUnknown";
    case Err::EndpointUnreachable: return "EndpointUnreachable";
    case Err::Timeout: return "Timeout";
    case Err::MalformedHeader: return "MalformedHeader";
    case Err::LengthMismatch: return "LengthMismatch";
    case Err::BadKey: return "BadKey";
    case Err::DuplicateTask: return "DuplicateTask";
    case Err::DuplicateMember: return "DuplicateMember";
    case Err::NotAMember: return "NotAMember";
    case Err::DuplicateName: return "DuplicateName";
    case Err::SourceUnreadable: return "SourceUnreadable";
    case Err::SchemaMismatch: return "SchemaMismatch";
    case Err::MissingField: return "MissingField";
    case Err::UnknownDatasetKind: return "UnknownDatasetKind";
    case Err::BadGeneratorParams: return "BadGeneratorParams";
    case Err::RoundTimeout: return "RoundTimeout";
    case Err::AggregationError: return "AggregationError";
    case Err::BadConfig: return "BadConfig";
    }
    return "UnknownError";
}

} // namespace fedsilo
