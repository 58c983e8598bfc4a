#pragma once

#include <stdexcept>

namespace segpipe {

/// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Container / parsing
struct FormatError : Error { using Error::Error; };
struct UnsupportedError : Error { using Error::Error; };
struct TruncationError : Error { using Error::Error; };
struct CapacityError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// Grids and pairing
struct GeometryError : Error { using Error::Error; };
struct RegistrationError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };

// Operations
struct KindError : Error { using Error::Error; };
struct DegenerateStatisticsError : Error { using Error::Error; };
struct EmptyMaskError : Error { using Error::Error; };
struct BoundsError : Error { using Error::Error; };
struct RecordMismatchError : Error { using Error::Error; };
struct UnknownLabelError : Error { using Error::Error; };
struct RuleConflictError : Error { using Error::Error; };
struct ParameterError : Error { using Error::Error; };
struct EmptyInputError : Error { using Error::Error; };

}  // namespace segpipe
