#pragma once

#include <stdexcept>
#include <string>

namespace butler {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// trajectory_core
class EmptyAfterTrim : public Error {
 public:
  using Error::Error;
};
class OutOfRange : public Error {
 public:
  using Error::Error;
};
class MixedLabels : public Error {
 public:
  using Error::Error;
};
class MixedDimensions : public Error {
 public:
  using Error::Error;
};

// gmm_learning
class TooFewDistinctPoints : public Error {
 public:
  using Error::Error;
};
class DegenerateComponent : public Error {
 public:
  using Error::Error;
};

// persistence
class FormatError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};

// perception_fusion
class NoValidDepth : public Error {
 public:
  using Error::Error;
};

// manager
class StubMissing : public Error {
 public:
  using Error::Error;
};
class TaskActionFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace butler
