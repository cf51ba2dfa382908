#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cfd {

/// Base for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI when it reports failures.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define CFD_DEFINE_ERROR(Name)                                          \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(#Name, what) {}      \
  };

CFD_DEFINE_ERROR(InvalidInput)
CFD_DEFINE_ERROR(ShapeError)
CFD_DEFINE_ERROR(NumericError)
CFD_DEFINE_ERROR(ConfigError)
CFD_DEFINE_ERROR(FormatError)
CFD_DEFINE_ERROR(PlacementError)
CFD_DEFINE_ERROR(DatasetError)
CFD_DEFINE_ERROR(BoundaryError)
CFD_DEFINE_ERROR(InsufficientData)

#undef CFD_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : Error("ParseError", what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace cfd
