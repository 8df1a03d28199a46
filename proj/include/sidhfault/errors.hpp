#pragma once

#include <stdexcept>
#include <string>

namespace sidhfault {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (out-of-range index, bad key range, ...).
class ContractViolation : public Error {
  public:
    using Error::Error;
};

class InversionOfZero : public Error {
  public:
    InversionOfZero() : Error("inversion of zero") {}
};

class NotASquare : public Error {
  public:
    NotASquare() : Error("square root of a non-square") {}
};

// (alpha : beta) with alpha == beta, or A^2 == 4.
class DegenerateCoefficient : public Error {
  public:
    using Error::Error;
};

class InvalidParameters : public Error {
  public:
    using Error::Error;
};

// Bounded rejection sampling ran out of attempts.
class SamplingExhausted : public Error {
  public:
    using Error::Error;
};

class InconsistentPublicKey : public Error {
  public:
    using Error::Error;
};

// Oracle answers that no trit value can explain.
class OracleContradiction : public Error {
  public:
    using Error::Error;
};

class ParseError : public Error {
  public:
    using Error::Error;
};

} // namespace sidhfault
