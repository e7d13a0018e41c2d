// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the microgrpo authors

#pragma once

#include <stdexcept>
#include <string>

namespace microgrpo {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent numerical input (misaligned vectors, NaNs, ...).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// GRPO group smaller than the minimum of two rollouts.
class GroupTooSmallError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

// Bad configuration value or schema violation in a config file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Prompt + response would not fit in the policy context window.
class SequenceTooLongError : public Error {
 public:
  using Error::Error;
};

// Snapshot file is corrupt, truncated, or has an unsupported version.
class SnapshotError : public Error {
 public:
  using Error::Error;
};

// Scene/question generation was asked for something infeasible.
class GenerationError : public Error {
 public:
  using Error::Error;
};

// Non-finite gradient encountered; the optimizer step was aborted.
class GradientError : public Error {
 public:
  using Error::Error;
};

// Snapshot, dataset, and vocabulary do not belong together.
class IncompatibilityError : public Error {
 public:
  using Error::Error;
};

// Reports being compared were produced on different eval sets.
class IncomparableRunsError : public Error {
 public:
  using Error::Error;
};

// Fewer data points than an analysis needs.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// Training diverged (non-finite loss); last good snapshot is retained.
class TrainAbortError : public Error {
 public:
  using Error::Error;
};

}  // namespace microgrpo
