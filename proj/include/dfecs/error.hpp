#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dfecs {

enum class ErrorKind {
    MissingAnchor,
    DegenerateAnchors,
    InsufficientAnchors,
    CoincidentAnchors,
    SubjectMismatch,
    SampleTooLarge,
    NonFinite,
    DegenerateData,
    NegativeInput,
    EmptyGrid,
    ColumnMismatch,
    ZeroData,
    IncompleteLabels,
    ParseError,
    SchemaError,
    ChecksumMismatch,
    VersionUnsupported,
    ShapeError,
    ConfigError,
    IoError,
    InconsistentModel,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MissingAnchor: return "MissingAnchor";
        case ErrorKind::DegenerateAnchors: return "DegenerateAnchors";
        case ErrorKind::InsufficientAnchors: return "InsufficientAnchors";
        case ErrorKind::CoincidentAnchors: return "CoincidentAnchors";
        case ErrorKind::SubjectMismatch: return "SubjectMismatch";
        case ErrorKind::SampleTooLarge: return "SampleTooLarge";
        case ErrorKind::NonFinite: return "NonFinite";
        case ErrorKind::DegenerateData: return "DegenerateData";
        case ErrorKind::NegativeInput: return "NegativeInput";
        case ErrorKind::EmptyGrid: return "EmptyGrid";
        case ErrorKind::ColumnMismatch: return "ColumnMismatch";
        case ErrorKind::ZeroData: return "ZeroData";
        case ErrorKind::IncompleteLabels: return "IncompleteLabels";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::SchemaError: return "SchemaError";
        case ErrorKind::ChecksumMismatch: return "ChecksumMismatch";
        case ErrorKind::VersionUnsupported: return "VersionUnsupported";
        case ErrorKind::ShapeError: return "ShapeError";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::InconsistentModel: return "InconsistentModel";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// The message without the category prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

}  // namespace dfecs
