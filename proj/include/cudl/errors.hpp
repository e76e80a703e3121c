#pragma once

#include <stdexcept>
#include <string>

namespace cudl {

/// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A flag or function argument is outside its allowed range.
class InvalidParameterError : public Error {
  public:
    using Error::Error;
};

/// Too few rows to fit the requested quantity.
class InsufficientDataError : public Error {
  public:
    using Error::Error;
};

/// Input dimensions disagree (vector lengths, covariate widths).
class DimensionMismatchError : public Error {
  public:
    using Error::Error;
};

/// A CSV cell failed to parse; carries the 1-based data row number.
class CsvParseError : public Error {
  public:
    CsvParseError(const std::string& msg, long row) : Error(msg), row_(row) {}
    long row() const { return row_; }

  private:
    long row_;
};

/// The censoring survival estimate hit zero at an observed time.
class PositivityError : public Error {
  public:
    PositivityError(const std::string& msg, long row) : Error(msg), row_(row) {}
    long row() const { return row_; }

  private:
    long row_;
};

/// Conditional expectation requested at a point with no remaining mass.
class DegenerateConditioningError : public Error {
  public:
    using Error::Error;
};

/// Non-finite loss during network training; carries epoch and batch.
class DivergenceError : public Error {
  public:
    DivergenceError(const std::string& msg, int epoch, int batch)
        : Error(msg), epoch_(epoch), batch_(batch) {}
    int epoch() const { return epoch_; }
    int batch() const { return batch_; }

  private:
    int epoch_;
    int batch_;
};

/// Newton-Raphson failed to reach the gradient tolerance.
class ConvergenceError : public Error {
  public:
    using Error::Error;
};

/// Monotone partial likelihood, coefficients diverging.
class SeparationError : public Error {
  public:
    using Error::Error;
};

/// A prediction fell outside the range the metric requires.
class InvalidPredictionError : public Error {
  public:
    using Error::Error;
};

/// A cross-validation fold ended up with no scoreable rows.
class DegenerateFoldError : public Error {
  public:
    using Error::Error;
};

}  // namespace cudl
