#pragma once

#include <stdexcept>
#include <string>

namespace lang2face {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define LANG2FACE_DEFINE_ERROR(NAME)                          \
  struct NAME : Error {                                       \
    explicit NAME(const std::string& msg) : Error(msg) {}     \
  }

LANG2FACE_DEFINE_ERROR(UnsupportedAU);
LANG2FACE_DEFINE_ERROR(IntensityOutOfRange);
LANG2FACE_DEFINE_ERROR(ParseError);
LANG2FACE_DEFINE_ERROR(EmptyCorpus);
LANG2FACE_DEFINE_ERROR(LengthMismatch);
LANG2FACE_DEFINE_ERROR(WrongLevel);
LANG2FACE_DEFINE_ERROR(WrongShape);
LANG2FACE_DEFINE_ERROR(ShapeMismatch);
LANG2FACE_DEFINE_ERROR(DimMismatch);
LANG2FACE_DEFINE_ERROR(BatchTooSmall);
LANG2FACE_DEFINE_ERROR(DomainError);
LANG2FACE_DEFINE_ERROR(DegenerateCovariance);
LANG2FACE_DEFINE_ERROR(EditNotApplicable);
LANG2FACE_DEFINE_ERROR(NonFiniteLoss);
LANG2FACE_DEFINE_ERROR(IOError);
LANG2FACE_DEFINE_ERROR(ConfigError);

#undef LANG2FACE_DEFINE_ERROR

}  // namespace lang2face
