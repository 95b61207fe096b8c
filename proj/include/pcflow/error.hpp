#pragma once

#include <stdexcept>
#include <string>

namespace pcflow {

// Base of every error raised by the library. The CLI maps any of these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PCFLOW_DEFINE_ERROR(Name)      \
  class Name : public Error {          \
   public:                             \
    using Error::Error;                \
  }

PCFLOW_DEFINE_ERROR(MetadataError);
PCFLOW_DEFINE_ERROR(GeometryError);
PCFLOW_DEFINE_ERROR(FormatError);
PCFLOW_DEFINE_ERROR(OrderingError);
PCFLOW_DEFINE_ERROR(TruncationError);
PCFLOW_DEFINE_ERROR(SeedError);
PCFLOW_DEFINE_ERROR(EmptyInputError);
PCFLOW_DEFINE_ERROR(DegenerateDatasetError);
PCFLOW_DEFINE_ERROR(DegenerateInputError);
PCFLOW_DEFINE_ERROR(ConfigError);
PCFLOW_DEFINE_ERROR(EmptyStudyError);
PCFLOW_DEFINE_ERROR(JoinError);
PCFLOW_DEFINE_ERROR(IoError);

#undef PCFLOW_DEFINE_ERROR

}  // namespace pcflow
