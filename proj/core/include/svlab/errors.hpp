#pragma once

#include <stdexcept>
#include <string>

namespace svlab {

// Malformed or truncated on-disk data (WAV headers, parameter files, manifests).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Well-formed file whose shape we do not handle (stereo audio, wrong rate...).
class UnsupportedFormatError : public std::runtime_error {
 public:
  explicit UnsupportedFormatError(const std::string& what) : std::runtime_error(what) {}
};

// Input that is structurally valid but mathematically singular
// (zero mean of antipodal centroids, zero sniper vector, ...).
class DegenerateInputError : public std::runtime_error {
 public:
  explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

// Trigger optimization ran out of budget below the minimum usable similarity.
class SynthesisFailure : public std::runtime_error {
 public:
  SynthesisFailure(const std::string& what, double sim)
      : std::runtime_error(what), final_similarity(sim) {}
  double final_similarity;
};

}  // namespace svlab
