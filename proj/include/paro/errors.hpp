#pragma once

#include <stdexcept>
#include <string>

namespace paro {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidArgumentError : Error {
  using Error::Error;
};

/// A coefficient field failed validation (e.g. non-SPD diffusion sample).
struct InvalidCoefficientError : Error {
  using Error::Error;
};

/// Indefiniteness detected during a CG solve (p'Ap <= 0).
struct NotSpdError : Error {
  using Error::Error;
};

/// An iterative solver hit its iteration cap; carries the final residual.
struct IterationLimitError : Error {
  double residual;
  IterationLimitError(const std::string& what, double res) : Error(what), residual(res) {}
};

/// Objects from incompatible mesh generations were combined.
struct LineageError : Error {
  using Error::Error;
};

/// Problem size exceeds a hard capacity cap.
struct CapacityError : Error {
  using Error::Error;
};

/// A field could not be evaluated (non-finite value, point outside domain, ...).
struct EvaluationError : Error {
  using Error::Error;
};

/// Evaluation requested exactly at a Coulomb singularity.
struct SingularPointError : EvaluationError {
  using EvaluationError::EvaluationError;
};

struct OutOfDomainError : EvaluationError {
  using EvaluationError::EvaluationError;
};

/// A dense pencil violated its contract (asymmetry, B not SPD).
struct PencilError : Error {
  using Error::Error;
};

/// Orthonormalization dropped every input vector.
struct EmptyBasisError : Error {
  using Error::Error;
};

/// Candidate span collapsed below the requested orbital count.
struct DegenerateSpanError : Error {
  using Error::Error;
};

/// SCF divergence (energy increased over several consecutive iterations).
struct ScfDivergenceError : Error {
  using Error::Error;
};

/// Config file parse failure; message names the offending key and line.
struct ParseError : Error {
  using Error::Error;
};

}  // namespace paro
