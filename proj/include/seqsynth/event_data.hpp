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

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace seqsynth {

struct Event {
  double time = 0.0;
  int type = 0;

  bool operator==(const Event&) const = default;
};

struct EventSequence {
  std::string subject_id;
  std::vector<Event> events;
  int label = 0;

  bool operator==(const EventSequence&) const = default;
};

// Maps event names to dense indices 0..K-1. END is K and PAD is K+1, so both
// sit outside the range the intensity heads cover.
//
// A numeric event "wbc" observed with values {4.2, 9.8} contributes the two
// names "wbc=4.2" and "wbc=9.8"; `bins["wbc"]` holds the sorted unique values.
class EventVocabulary {
 public:
  EventVocabulary() = default;

  // Builds a vocabulary from categorical names and numeric (name, values)
  // observations. Order is by base name, then by numeric value; a categorical
  // name sorts before numeric entries of the same base name.
  static EventVocabulary build(const std::vector<std::string>& categorical,
                               const std::map<std::string, std::vector<double>>& numeric);

  int size() const { return static_cast<int>(names_.size()); }
  int end_index() const { return size(); }
  int pad_index() const { return size() + 1; }
  bool empty() const { return names_.empty(); }

  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(int index) const;
  const std::map<std::string, std::vector<double>>& bins() const { return bins_; }

  std::optional<int> find(std::string_view name) const;
  // Throws VocabularyMismatchError for unknown names.
  int index_of(std::string_view name) const;

  bool is_numeric(std::string_view base) const;
  // Index of the vocabulary entry nearest to `value` among the bins of `base`.
  int discretize(std::string_view base, double value) const;

  // Splits an entry into (base name, value) for writing; value is empty for
  // categorical entries.
  std::pair<std::string, std::optional<double>> decompose(int index) const;

  bool operator==(const EventVocabulary&) const = default;

 private:
  std::vector<std::string> names_;
  std::map<std::string, std::vector<double>> bins_;
  std::map<std::string, int, std::less<>> lookup_;
};

// Shortest decimal form that round-trips, used in numeric entry names.
std::string format_value(double value);

/// Nearest bin value to `value`; equal distances go to the lower value.
/// Throws ConfigError if `bins` is empty.
std::size_t nearest_bin(std::span<const double> bins, double value);

/// Vocabulary index for a numeric observation, e.g. ("wbc", 7.0) -> "wbc=4.2".
int discretize_numeric(const EventVocabulary& vocab, std::string_view name, double value);

struct ParseOptions {
  // When set, names are resolved against this vocabulary (numeric values
  // snapped to its bins) instead of building a new one.
  const EventVocabulary* vocabulary = nullptr;
  // Shift each subject so its first event is at 1.0 and break ties.
  bool normalize_times = true;
};

struct ParseResult {
  std::vector<EventSequence> sequences;
  EventVocabulary vocabulary;
  // Label rows whose subject has no events.
  int unknown_label_subjects = 0;
};

/// Reads `subject_id,time,event_name[,value]` plus an optional
/// `subject_id,label` file. Subjects appear in order of first occurrence.
ParseResult parse_events(const std::filesystem::path& events_csv,
                         const std::filesystem::path& labels_csv,
                         const ParseOptions& options = {});

/// One JSON object per line:
/// {"subject_id": "...", "label": 0, "events": [{"time": 1.0, "event": "A", "value": null}]}
ParseResult parse_events_jsonl(const std::filesystem::path& path, const ParseOptions& options = {});

void write_events_csv(const std::filesystem::path& path, std::span<const EventSequence> seqs,
                      const EventVocabulary& vocab);
void write_labels_csv(const std::filesystem::path& path, std::span<const EventSequence> seqs);
void write_events_jsonl(const std::filesystem::path& path, std::span<const EventSequence> seqs,
                        const EventVocabulary& vocab);

/// Shifts the first event to t = 1.0 and makes times strictly increasing by
/// adding i * 1e-6 to the i-th member of a tie.
void normalize_times(EventSequence& seq);

constexpr double kTieEpsilon = 1e-6;

// Checks sortedness, strictly increasing times, and index range.
void validate_sequence(const EventSequence& seq, const EventVocabulary& vocab);

struct PaddedBatch {
  Eigen::MatrixXd times;  // B x Lmax
  Eigen::MatrixXi types;  // B x Lmax
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
  std::vector<int> lengths;  // real events per row, END excluded
};

/// Row layout [e1 .. eL, END, PAD ...]; END carries time t_L and is masked
/// in. Throws TruncationError unless max_len >= L + 1 for every row.
PaddedBatch pad_batch(std::span<const EventSequence> seqs, int max_len,
                      const EventVocabulary& vocab);

/// Real events of every row, END and padding dropped.
std::vector<std::vector<Event>> unpad(const PaddedBatch& batch);

struct SplitResult {
  std::vector<EventSequence> train;
  std::vector<EventSequence> test;
  double train_positive_rate = 0.0;
  double test_positive_rate = 0.0;
};

/// Shuffled split with floor(n * train_frac) training subjects, clamped so
/// both sides are non-empty.
SplitResult split(std::span<const EventSequence> seqs, double train_frac, std::uint64_t seed);

double positive_rate(std::span<const EventSequence> seqs);

}  // namespace seqsynth
