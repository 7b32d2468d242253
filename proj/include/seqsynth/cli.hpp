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

#include <filesystem>
#include <string>
#include <vector>

namespace seqsynth {

// Exit codes of the `seqsynth` tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitInput = 2,         // bad arguments, config, data, or filesystem trouble
  kExitDiverged = 3,      // training hit a non-finite loss
  kExitVersion = 4,       // checkpoint format/version mismatch
  kExitVocabulary = 5,    // event names outside the model or real vocabulary
};

// args[0] is the program name.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

// Data directory layout shared by simulate, train, generate and evaluate.
std::filesystem::path events_file(const std::filesystem::path& dir, const std::string& split);
std::filesystem::path labels_file(const std::filesystem::path& dir, const std::string& split);

// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace seqsynth
