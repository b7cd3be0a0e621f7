#pragma once

#include <stdexcept>
#include <string>

namespace cultmap {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ingestion and configuration.
class LoadError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

// Model fitting.
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};
class InsufficientOverlapError : public Error {
 public:
  using Error::Error;
};
class DecompositionError : public Error {
 public:
  using Error::Error;
};
class RotationError : public Error {
 public:
  using Error::Error;
};
class OrientationError : public Error {
 public:
  using Error::Error;
};
class IncompleteObservationError : public Error {
 public:
  using Error::Error;
};

// Questions and prompts.
class EncodingError : public Error {
 public:
  using Error::Error;
};
class PromptError : public Error {
 public:
  using Error::Error;
};

// Gateway.
class TransportError : public Error {
 public:
  using Error::Error;
};
class CredentialError : public Error {
 public:
  using Error::Error;
};
class MissingTranscriptError : public Error {
 public:
  explicit MissingTranscriptError(std::string key)
      : Error("no transcript recorded for key " + key), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Metrics.
class ExclusionError : public Error {
 public:
  using Error::Error;
};
class StatsError : public Error {
 public:
  using Error::Error;
};

}  // namespace cultmap
