#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mmvae {

/// Shapes or sizes that do not fit together (layer widths, layouts).
struct ConfigurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An API called outside its contract (bad index set, stale tape, ...).
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Non-finite or otherwise invalid data handed to the model.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Rejected dataset files or raw matrices.
struct IngestionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training diverged. Carries where it happened.
struct TrainingError : std::runtime_error {
  TrainingError(const std::string& what, long epoch, long sample = -1)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) +
                           (sample >= 0 ? ", sample " + std::to_string(sample)
                                        : std::string{}) +
                           ")"),
        epoch(epoch),
        sample(sample) {}
  long epoch;
  long sample;
};

/// Every run of an experiment failed, or experiments cannot be combined.
struct ExperimentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mmvae
