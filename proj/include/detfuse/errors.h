#ifndef DETFUSE_ERRORS_H_
#define DETFUSE_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace detfuse {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input was readable but violates a domain rule. The CLI maps these to exit 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Input could not be read or decoded. The CLI maps these to exit 2.
class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public IoError {
 public:
  ParseError(std::size_t location, const std::string& reason)
      : IoError("parse error at " + std::to_string(location) + ": " + reason),
        location_(location) {}

  // 1-based line for jsonl, 0-based element index for JSON arrays.
  std::size_t location() const { return location_; }

 private:
  std::size_t location_;
};

class InvariantViolation : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DuplicateRecord : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnmappedCategory : public ValidationError {
 public:
  explicit UnmappedCategory(const std::string& category)
      : ValidationError("unmapped category: " + category), category_(category) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

class FrameMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class MissingGroundTruth : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptyGroundTruth : public ValidationError {
 public:
  EmptyGroundTruth() : ValidationError("ground truth contains no boxes") {}
};

class NoTracks : public ValidationError {
 public:
  NoTracks() : ValidationError("ground truth carries no track ids") {}
};

class InvalidProfile : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InvalidConfig : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace detfuse

#endif  // DETFUSE_ERRORS_H_
