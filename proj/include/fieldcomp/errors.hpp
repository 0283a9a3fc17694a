#pragma once

#include <stdexcept>
#include <string>

namespace fieldcomp {

// Error taxonomy. Three categories, each mapped to a distinct process exit
// code by the CLI:
//   ValidationError -> 2  (bad config, bad input data, precondition violation)
//   IoError         -> 3  (filesystem problems)
//   NumericalError  -> 4  (computation cannot produce a reliable result)
// Concrete error types subclass one of the categories so call sites can
// catch either the specific condition or the whole class.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct NumericalError : Error {
    using Error::Error;
};

#define FIELDCOMP_ERROR(Name, Category)                                       \
    struct Name : Category {                                                  \
        explicit Name(const std::string& msg) : Category(#Name ": " + msg) {} \
    }

// Geometry.
FIELDCOMP_ERROR(FewerThanThreePoints, ValidationError);
FIELDCOMP_ERROR(DegenerateGeometry, NumericalError);
FIELDCOMP_ERROR(NearParallelPlanes, NumericalError);

// Simulator.
FIELDCOMP_ERROR(InvalidConfig, ValidationError);
FIELDCOMP_ERROR(InvalidBeam, ValidationError);
FIELDCOMP_ERROR(OutOfBounds, ValidationError);
FIELDCOMP_ERROR(LineParallelToPlane, NumericalError);

// PCA.
FIELDCOMP_ERROR(TooFewSamples, ValidationError);
FIELDCOMP_ERROR(NonFiniteData, ValidationError);
FIELDCOMP_ERROR(InsufficientRuns, ValidationError);
FIELDCOMP_ERROR(MissingBeam, ValidationError);
FIELDCOMP_ERROR(DuplicateBeam, ValidationError);

// Neural network.
FIELDCOMP_ERROR(DimensionMismatch, ValidationError);
FIELDCOMP_ERROR(ShapeMismatch, ValidationError);
FIELDCOMP_ERROR(EmptyTrainingSet, ValidationError);
FIELDCOMP_ERROR(EncodingMismatch, ValidationError);

// Metrics / CLI.
FIELDCOMP_ERROR(ConfigError, ValidationError);
FIELDCOMP_ERROR(ParseError, ValidationError);
FIELDCOMP_ERROR(AuditMismatch, NumericalError);

#undef FIELDCOMP_ERROR

}  // namespace fieldcomp
