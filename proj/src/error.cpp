#include "polymp/error.hpp"

namespace polymp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonPositiveFactor: return "NonPositiveFactor";
    case ErrorCode::DegenerateShear: return "DegenerateShear";
    case ErrorCode::ZeroExtent: return "ZeroExtent";
    case ErrorCode::ExteriorCollapsed: return "ExteriorCollapsed";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::RingTooShort: return "RingTooShort";
    case ErrorCode::UnsupportedGeometry: return "UnsupportedGeometry";
    case ErrorCode::MissingLabel: return "MissingLabel";
    case ErrorCode::InvalidPermutation: return "InvalidPermutation";
    case ErrorCode::TooManyVertices: return "TooManyVertices";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::TapeConsumed: return "TapeConsumed";
    case ErrorCode::NanDetected: return "NanDetected";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::MissingGradient: return "MissingGradient";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::IncompatibleBackbone: return "IncompatibleBackbone";
    case ErrorCode::InvalidRatio: return "InvalidRatio";
    case ErrorCode::IOErr: return "IOErr";
    case ErrorCode::CorruptRecord: return "CorruptRecord";
    case ErrorCode::IncompatibleCheckpoint: return "IncompatibleCheckpoint";
    case ErrorCode::GradCheckFailed: return "GradCheckFailed";
    case ErrorCode::SampleNotFound: return "SampleNotFound";
  }
  return "Unknown";
}

}  // namespace polymp
