// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace nwi {

/// Base class for all engine errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class GridTooSmall : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class IndexOutOfGrid : public Error {
 public:
  using Error::Error;
};

class InvalidProperty : public Error {
 public:
  using Error::Error;
};

/// CFL condition violated; carries the offending Courant number.
class CflViolation : public Error {
 public:
  CflViolation(double cr, const std::string& msg) : Error(msg), cr(cr) {}
  double cr;
};

class PmlTooWide : public Error {
 public:
  using Error::Error;
};

/// 1 + 2BU/(C^2 Q) dropped below the configured floor at some step.
class NonlinearityBlowup : public Error {
 public:
  NonlinearityBlowup(int step, const std::string& msg) : Error(msg), step(step) {}
  int step;
};

/// |U| exceeded the configured cap (or went non-finite) at some step.
class FieldDiverged : public Error {
 public:
  FieldDiverged(int step, const std::string& msg) : Error(msg), step(step) {}
  int step;
};

class NyquistViolation : public Error {
 public:
  using Error::Error;
};

class ZeroSignal : public Error {
 public:
  using Error::Error;
};

class ApertureOutOfArray : public Error {
 public:
  using Error::Error;
};

class ProblemTooLarge : public Error {
 public:
  using Error::Error;
};

class SingularBlock : public Error {
 public:
  using Error::Error;
};

class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

class TapeMemoryExceeded : public Error {
 public:
  using Error::Error;
};

class InvalidGeometry : public Error {
 public:
  using Error::Error;
};

class DegenerateBounds : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class MissingMap : public Error {
 public:
  using Error::Error;
};

/// Configuration error; message carries the dotted key path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace nwi
