#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aog {

enum class ErrorCode {
    BadMagic,
    BadVersion,
    TruncatedPayload,
    InvalidLayout,
    EmptyCorpus,
    IndexOutOfRange,
    NoAnnotations,
    SchemaMismatch,
    CorruptPayload,
    EmptyDeformationRange,
    NoPatterns,
    EmptyModel,
    DegenerateScores,
    UnknownImage,
    LengthMismatch,
    PoolExhausted,
    MissingBbox,
    MalformedAnswer,
    NoPendingQuestion,
    UnknownTemplate,
    OracleFailure,
    ZeroDiagonal,
    DegenerateBox,
    EmptyLayer,
    InvalidConfig,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace aog
