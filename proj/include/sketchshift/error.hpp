#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sketchshift {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SKETCHSHIFT_DEFINE_ERROR(Name)        \
    class Name : public Error {               \
    public:                                   \
        using Error::Error;                   \
    }

SKETCHSHIFT_DEFINE_ERROR(ParseError);
SKETCHSHIFT_DEFINE_ERROR(EncodeError);
SKETCHSHIFT_DEFINE_ERROR(DimensionError);
SKETCHSHIFT_DEFINE_ERROR(ValidationError);
SKETCHSHIFT_DEFINE_ERROR(IoError);
SKETCHSHIFT_DEFINE_ERROR(InsufficientPoints);
SKETCHSHIFT_DEFINE_ERROR(EmptyModel);
SKETCHSHIFT_DEFINE_ERROR(UnknownCluster);
SKETCHSHIFT_DEFINE_ERROR(NoOtherCategory);
SKETCHSHIFT_DEFINE_ERROR(MissingSketch);
SKETCHSHIFT_DEFINE_ERROR(InvalidStrokes);
SKETCHSHIFT_DEFINE_ERROR(DuplicateId);

#undef SKETCHSHIFT_DEFINE_ERROR

/// Strict-decoder failure. `offset()` is the byte position of the first
/// violation in the input.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace sketchshift
