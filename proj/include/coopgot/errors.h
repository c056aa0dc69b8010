#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace coopgot {

// Base for every error raised by the library. Subclasses name the failure
// category; the CLI maps IoError to exit code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define COOPGOT_DEFINE_ERROR(Name)          \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

COOPGOT_DEFINE_ERROR(OutOfRange);
COOPGOT_DEFINE_ERROR(UnknownId);
COOPGOT_DEFINE_ERROR(InvalidConfig);
COOPGOT_DEFINE_ERROR(GenerationFailed);
COOPGOT_DEFINE_ERROR(DegenerateInput);
COOPGOT_DEFINE_ERROR(CyclicGraph);
COOPGOT_DEFINE_ERROR(UnknownNode);
COOPGOT_DEFINE_ERROR(MissingSample);
COOPGOT_DEFINE_ERROR(MissingDetections);
COOPGOT_DEFINE_ERROR(IoError);
COOPGOT_DEFINE_ERROR(CoverageGap);
COOPGOT_DEFINE_ERROR(LengthMismatch);
COOPGOT_DEFINE_ERROR(RangeError);
COOPGOT_DEFINE_ERROR(EmptyInput);
COOPGOT_DEFINE_ERROR(UnknownMethod);
COOPGOT_DEFINE_ERROR(ConfigMismatch);

#undef COOPGOT_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, std::string expected, const std::string& text)
      : Error("parse error at byte " + std::to_string(offset) + ": expected " +
              expected + " in \"" + text + "\""),
        offset_(offset),
        expected_(std::move(expected)) {}

  std::size_t offset() const { return offset_; }
  const std::string& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::string expected_;
};

// Failures of the external answerer transport.
class ExternalError : public Error {
 public:
  enum class Kind { kTimeout, kTransport, kBadResponse };

  ExternalError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace coopgot
