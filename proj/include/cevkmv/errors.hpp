#pragma once

#include <stdexcept>
#include <string>

namespace cevkmv {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite input, or a value outside the documented domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Iterative solver hit its cap without meeting the tolerance.
class NoConvergence : public Error {
public:
    using Error::Error;
};

/// PDE self-convergence check failed on the requested grid.
class GridTooCoarse : public Error {
public:
    using Error::Error;
};

/// Fixed-effects slope is unidentified (zero within-firm variation).
class NoWithinVariation : public Error {
public:
    using Error::Error;
};

/// Outer search for beta ended on a boundary of the admissible range.
class CalibrationDiverged : public Error {
public:
    using Error::Error;
};

/// Sample with zero variance (gamma shape MLE diverges).
class DegenerateSample : public Error {
public:
    using Error::Error;
};

/// Fewer returns than the volatility window needs.
class InsufficientHistory : public Error {
public:
    using Error::Error;
};

/// Firm/field with no observed value to fill gaps from.
class AllMissing : public Error {
public:
    using Error::Error;
};

/// Malformed input files or configuration.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Too many firms of a group dropped out of a study run.
class ExclusionThresholdBreached : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

}  // namespace detail
}  // namespace cevkmv
