#pragma once

#include <stdexcept>
#include <string>

namespace edgesem {

// Each category maps to a distinct CLI exit code (see pipeline.hpp).

/// Input does not match the expected column layout or artifact schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Data is structurally valid but unusable (empty splits, no edges, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or parameters during optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value, version or fingerprint mismatch.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A stage's prerequisite artifact is absent. The message names the
/// command that produces it.
class MissingArtifactError : public std::runtime_error {
 public:
  MissingArtifactError(const std::string& path, const std::string& producer)
      : std::runtime_error("missing artifact '" + path + "'; run `edgesem " +
                           producer + "` first"),
        path_(path),
        producer_(producer) {}

  const std::string& path() const noexcept { return path_; }
  const std::string& producer() const noexcept { return producer_; }

 private:
  std::string path_;
  std::string producer_;
};

}  // namespace edgesem
