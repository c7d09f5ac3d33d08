#pragma once

#include <stdexcept>
#include <string>

namespace graspforge {

// Every failure raised by the library derives from Error so callers can catch
// the whole family at a boundary (the CLI maps it to exit code 2).
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

#define GRASPFORGE_ERROR(Name)                                                 \
  class Name : public Error                                                    \
  {                                                                            \
  public:                                                                      \
    using Error::Error;                                                        \
  }

GRASPFORGE_ERROR(InvalidArgument);
GRASPFORGE_ERROR(DegenerateFrame);
GRASPFORGE_ERROR(InvalidCount);
GRASPFORGE_ERROR(BehindCamera);
GRASPFORGE_ERROR(NonPositiveDepth);
GRASPFORGE_ERROR(EmptyMesh);
GRASPFORGE_ERROR(NearClipViolation);
GRASPFORGE_ERROR(MissingColors);
GRASPFORGE_ERROR(DepthOutOfRange);
GRASPFORGE_ERROR(ChannelMismatch);
GRASPFORGE_ERROR(DimensionMismatch);
GRASPFORGE_ERROR(EmptyInput);
GRASPFORGE_ERROR(NonUnitInput);
GRASPFORGE_ERROR(EmptyPool);
GRASPFORGE_ERROR(DegenerateProjection);
GRASPFORGE_ERROR(InsufficientViews);
GRASPFORGE_ERROR(ParseError);
GRASPFORGE_ERROR(IoError);
GRASPFORGE_ERROR(ValidationError);

#undef GRASPFORGE_ERROR

}  // namespace graspforge
