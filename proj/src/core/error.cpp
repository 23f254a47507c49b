#include "gigags/core/error.hpp"

namespace gigags {

std::string_view
to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::NonPositiveDistance: return "NonPositiveDistance";
    case ErrorCode::DegenerateScale: return "DegenerateScale";
    case ErrorCode::ZeroPlaneDistance: return "ZeroPlaneDistance";
    case ErrorCode::PointAtInfinity: return "PointAtInfinity";
    case ErrorCode::DegenerateOrientation: return "DegenerateOrientation";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyPointCloud: return "EmptyPointCloud";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownView: return "UnknownView";
    case ErrorCode::TooFewCameras: return "TooFewCameras";
    case ErrorCode::OverlapDetected: return "OverlapDetected";
    case ErrorCode::UnsupportedCameraModel: return "UnsupportedCameraModel";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

int
exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument: return 2;
    case ErrorCode::NonFiniteLoss: return 4;
    default: return 3;
    }
}

} // namespace gigags
