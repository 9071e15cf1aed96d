#include "aog/error.hpp"

namespace aog {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::BadVersion: return "BadVersion";
        case ErrorCode::TruncatedPayload: return "TruncatedPayload";
        case ErrorCode::InvalidLayout: return "InvalidLayout";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::NoAnnotations: return "NoAnnotations";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::CorruptPayload: return "CorruptPayload";
        case ErrorCode::EmptyDeformationRange: return "EmptyDeformationRange";
        case ErrorCode::NoPatterns: return "NoPatterns";
        case ErrorCode::EmptyModel: return "EmptyModel";
        case ErrorCode::DegenerateScores: return "DegenerateScores";
        case ErrorCode::UnknownImage: return "UnknownImage";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::PoolExhausted: return "PoolExhausted";
        case ErrorCode::MissingBbox: return "MissingBbox";
        case ErrorCode::MalformedAnswer: return "MalformedAnswer";
        case ErrorCode::NoPendingQuestion: return "NoPendingQuestion";
        case ErrorCode::UnknownTemplate: return "UnknownTemplate";
        case ErrorCode::OracleFailure: return "OracleFailure";
        case ErrorCode::ZeroDiagonal: return "ZeroDiagonal";
        case ErrorCode::DegenerateBox: return "DegenerateBox";
        case ErrorCode::EmptyLayer: return "EmptyLayer";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace aog
