#pragma once

#include <stdexcept>
#include <string>

namespace inpaint_forge {

// Root of every error the library reports. Subclasses let callers (the CLI in
// particular) map failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FileNotFoundError : public Error {
 public:
  using Error::Error;
};

// File exists but is not a decodable PNG.
class NotAnImageError : public Error {
 public:
  using Error::Error;
};

// PNG decodes but carries more than one channel (RGB, gray+alpha, palette).
class MultiChannelError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Pixel values or range tag do not satisfy an Image contract.
class RangeError : public Error {
 public:
  using Error::Error;
};

class RegionError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Network specification is inconsistent (receptive field, depth, architecture mismatch).
class SpecError : public Error {
 public:
  using Error::Error;
};

// Pre-trained feature-extractor weights are missing or unusable.
class WeightsError : public Error {
 public:
  using Error::Error;
};

class CorruptFileError : public Error {
 public:
  using Error::Error;
};

class ConfigHashMismatchError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

}  // namespace inpaint_forge
