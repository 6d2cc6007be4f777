#pragma once

#include <stdexcept>
#include <string>

namespace fedledger {

// Error taxonomy shared across modules. Everything derives from Error so
// callers can catch the whole family or a specific kind.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor/vector dimension disagreement.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(what) {}
};

// Caller violated a documented operation precondition.
class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(what) {}
};

// Training produced a non-finite loss; carries the offending SGD iteration.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

// Stored artifacts are inconsistent (missing shard, digest mismatch, broken
// round chain, malformed file).
class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& what) : Error(what) {}
};

// Experiment configuration problem; carries the offending field path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error("config field '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Chain transport gave up (e.g. cache drain retry limit). The protocol
// layer attaches the round index; below it the round is unknown (-1).
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what) : Error(what) {}
  TransportError(const std::string& what, int round)
      : Error(what + " (round " + std::to_string(round) + ")"), round_(round) {}
  int round() const { return round_; }

 private:
  int round_ = -1;
};

// Public-contract operation rejected (insufficient funds, duplicate
// registration, out-of-order epoch, ...). State is unchanged when thrown.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(what) {}
};

// Log-store access without a valid, unconsumed grant.
class AccessDeniedError : public Error {
 public:
  explicit AccessDeniedError(const std::string& what) : Error(what) {}
};

}  // namespace fedledger
