#pragma once

#include <stdexcept>
#include <string>

namespace eeikd {

// Every error raised by the library derives from Error so callers (the CLI in
// particular) can map them to a single non-zero exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class RankError : public Error {
 public:
  using Error::Error;
};

/// All entries of a distribution were masked out.
class DegenerateDistributionError : public Error {
 public:
  using Error::Error;
};

/// KL(p || q) with q == 0 somewhere p > 0.
class InfiniteDivergenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Batch normalization asked for statistics of a single-sample batch.
class StatisticsError : public Error {
 public:
  using Error::Error;
};

/// Optimizer step requested before gradients were collected.
class NotReadyError : public Error {
 public:
  using Error::Error;
};

class BatchSizeError : public Error {
 public:
  using Error::Error;
};

class TooFewSamplesError : public Error {
 public:
  using Error::Error;
};

/// No pool sample cleared the adaptive threshold.
class EmptyCandidateSetError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class TapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace eeikd
