// Copyright 2026 The seqsynth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace seqsynth {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input and configuration problems. The CLI maps these to exit code 2.
class SchemaError : public Error {
  using Error::Error;
};
class ValidationError : public Error {
  using Error::Error;
};
class ConfigError : public Error {
  using Error::Error;
};

// Contract violations and domain errors raised by numerical routines.
class DomainError : public Error {
  using Error::Error;
};
class ContractError : public Error {
  using Error::Error;
};

class TruncationError : public Error {
  using Error::Error;
};
class SplitError : public Error {
  using Error::Error;
};

/// A NaN or infinity showed up while propagating gradients.
class PoisonedGradientError : public Error {
  using Error::Error;
};
class EvaluationError : public Error {
  using Error::Error;
};
class UndefinedLossError : public Error {
  using Error::Error;
};

/// Raised when a loss term becomes non-finite during training (exit code 3).
class TrainingAbortError : public Error {
  using Error::Error;
};

class UndefinedMetricError : public Error {
  using Error::Error;
};
class HorizonError : public Error {
  using Error::Error;
};
class SimulationError : public Error {
  using Error::Error;
};

class VersionMismatchError : public Error {  // exit code 4
  using Error::Error;
};
class VocabularyMismatchError : public Error {  // exit code 5
  using Error::Error;
};

}  // namespace seqsynth
