#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gigags {

enum class ErrorCode {
    // geometry / numerics
    NonPositiveDepth,
    NonPositiveDistance,
    DegenerateScale,
    ZeroPlaneDistance,
    PointAtInfinity,
    DegenerateOrientation,
    NonFiniteLoss,
    // shapes and sets
    EmptyPointCloud,
    EmptySet,
    ShapeMismatch,
    DimensionMismatch,
    UnknownView,
    TooFewCameras,
    OverlapDetected,
    // ingest / io
    UnsupportedCameraModel,
    MalformedLine,
    IoError,
    InvalidArgument,
    // configuration
    ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; the code identifies the failure.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

    ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    const std::string &message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

/// Process exit code for the CLI: 2 config, 3 data, 4 numeric failure.
int exit_code_for(ErrorCode code);

} // namespace gigags
