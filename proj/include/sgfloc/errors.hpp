#pragma once

#include <stdexcept>
#include <string>

namespace sgfloc {

// Every failure raised by the library derives from Error so callers can catch
// one type at stage boundaries and still dispatch on the concrete kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SGFLOC_DEFINE_ERROR(Name)        \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

SGFLOC_DEFINE_ERROR(InvalidArgument);
SGFLOC_DEFINE_ERROR(HorizonError);
SGFLOC_DEFINE_ERROR(EmptyQueue);
SGFLOC_DEFINE_ERROR(DimensionMismatch);
SGFLOC_DEFINE_ERROR(EmptyShape);
SGFLOC_DEFINE_ERROR(DegenerateShape);
SGFLOC_DEFINE_ERROR(ParamMismatch);
SGFLOC_DEFINE_ERROR(TooFewPoints);
SGFLOC_DEFINE_ERROR(GroupMismatch);
SGFLOC_DEFINE_ERROR(SingularSystem);
SGFLOC_DEFINE_ERROR(NoOverlap);
SGFLOC_DEFINE_ERROR(InvalidInput);
SGFLOC_DEFINE_ERROR(IoError);

#undef SGFLOC_DEFINE_ERROR

}  // namespace sgfloc
