#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace jointspace {

// Base of every error raised by the library. `name()` is the stable
// identifier the CLI reports on runtime failures.
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& what)
      : std::runtime_error(name + ": " + what), name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

#define JOINTSPACE_DEFINE_ERROR(Type)                                   \
  class Type : public Error {                                           \
   public:                                                              \
    explicit Type(const std::string& what) : Error(#Type, what) {}      \
  }

JOINTSPACE_DEFINE_ERROR(ZeroVector);
JOINTSPACE_DEFINE_ERROR(DimensionMismatch);
JOINTSPACE_DEFINE_ERROR(IdCollision);
JOINTSPACE_DEFINE_ERROR(UnknownId);
JOINTSPACE_DEFINE_ERROR(NotNormalized);
JOINTSPACE_DEFINE_ERROR(InvalidArgument);
JOINTSPACE_DEFINE_ERROR(Unsatisfiable);
JOINTSPACE_DEFINE_ERROR(InsufficientClasses);
JOINTSPACE_DEFINE_ERROR(LengthMismatch);
JOINTSPACE_DEFINE_ERROR(InvalidModification);
JOINTSPACE_DEFINE_ERROR(ExhaustedRetries);
JOINTSPACE_DEFINE_ERROR(DimensionTooSmall);
JOINTSPACE_DEFINE_ERROR(SchemaMismatch);

#undef JOINTSPACE_DEFINE_ERROR

// Carries the byte offset at which parsing stopped.
class MalformedFile : public Error {
 public:
  MalformedFile(const std::string& what, std::uint64_t offset)
      : Error("MalformedFile", what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace jointspace
