#pragma once

#include <stdexcept>
#include <string>

namespace ptdt {

// Base for every error raised by this library. `kind()` is the stable tag the
// CLI prints in its structured error output.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

#define PTDT_DEFINE_ERROR(Name)                                     \
  class Name : public Error {                                       \
   public:                                                           \
    using Error::Error;                                              \
    const char* kind() const noexcept override { return #Name; }     \
  }

PTDT_DEFINE_ERROR(ShapeError);
PTDT_DEFINE_ERROR(ContractError);
PTDT_DEFINE_ERROR(NumericError);
PTDT_DEFINE_ERROR(DataError);
PTDT_DEFINE_ERROR(EpisodeDone);
PTDT_DEFINE_ERROR(DegenerateBaselineError);
PTDT_DEFINE_ERROR(VersionError);
PTDT_DEFINE_ERROR(OracleError);
PTDT_DEFINE_ERROR(ConfigError);

#undef PTDT_DEFINE_ERROR

// Malformed input file. `line()` is 1-based; 0 when not line oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what), line_(line) {}
  const char* kind() const noexcept override { return "ParseError"; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace ptdt
