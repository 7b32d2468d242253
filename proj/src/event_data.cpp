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

#include "seqsynth/event_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

#include <boost/tokenizer.hpp>
#include <nlohmann/json.hpp>

#include "seqsynth/errors.hpp"
#include "seqsynth/rng.hpp"

namespace seqsynth {

namespace {

using Row = std::vector<std::string>;

struct RawEvent {
  double time;
  std::string name;
  std::optional<double> value;
};

struct RawSubject {
  std::string id;
  std::vector<RawEvent> events;
};

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

Row split_csv_line(const std::string& line, std::size_t row_number) {
  using Sep = boost::escaped_list_separator<char>;
  Row out;
  try {
    boost::tokenizer<Sep> tok(line, Sep('\\', ',', '"'));
    for (const auto& field : tok) out.push_back(trim(field));
  } catch (const boost::escaped_list_error& e) {
    throw ValidationError("row " + std::to_string(row_number) + ": " + e.what());
  }
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

double parse_double(const std::string& text, std::size_t row, const char* what) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ValidationError("row " + std::to_string(row) + ": bad " + what + " '" + text + "'");
  }
  if (!std::isfinite(v)) {
    throw ValidationError("row " + std::to_string(row) + ": non-finite " + what);
  }
  return v;
}

std::size_t column(const Row& header, const char* name, bool required,
                   const std::filesystem::path& path) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    if (required) throw SchemaError(path.string() + ": missing column '" + name + "'");
    return std::string::npos;
  }
  return static_cast<std::size_t>(it - header.begin());
}

int parse_label(const std::string& text, std::size_t row) {
  if (text == "0") return 0;
  if (text == "1") return 1;
  throw ValidationError("row " + std::to_string(row) + ": label must be 0 or 1, got '" + text +
                        "'");
}

// Resolves raw subjects against a vocabulary, building one if none is given.
ParseResult resolve(std::vector<RawSubject> raw, const std::map<std::string, int>& labels,
                    bool have_labels, const ParseOptions& options) {
  ParseResult result;
  if (options.vocabulary) {
    result.vocabulary = *options.vocabulary;
  } else {
    std::set<std::string> categorical;
    std::map<std::string, std::vector<double>> numeric;
    for (const auto& s : raw) {
      for (const auto& e : s.events) {
        if (e.value) {
          numeric[e.name].push_back(*e.value);
        } else {
          categorical.insert(e.name);
        }
      }
    }
    result.vocabulary = EventVocabulary::build(
        std::vector<std::string>(categorical.begin(), categorical.end()), numeric);
  }
  const EventVocabulary& vocab = result.vocabulary;

  std::set<std::string> seen;
  for (auto& s : raw) {
    EventSequence seq;
    seq.subject_id = s.id;
    seen.insert(s.id);
    for (const auto& e : s.events) {
      const int idx = e.value ? vocab.discretize(e.name, *e.value) : vocab.index_of(e.name);
      seq.events.push_back({e.time, idx});
    }
    std::stable_sort(seq.events.begin(), seq.events.end(), [](const Event& a, const Event& b) {
      return a.time < b.time || (a.time == b.time && a.type < b.type);
    });
    if (have_labels) {
      auto it = labels.find(s.id);
      if (it == labels.end()) throw ValidationError("subject '" + s.id + "' has no label");
      seq.label = it->second;
    }
    if (options.normalize_times) normalize_times(seq);
    result.sequences.push_back(std::move(seq));
  }
  for (const auto& [id, label] : labels) {
    if (!seen.count(id)) ++result.unknown_label_subjects;
  }
  return result;
}

std::map<std::string, int> read_labels(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::map<std::string, int> labels;
  if (!std::getline(in, line)) return labels;
  const Row header = split_csv_line(line, 1);
  const std::size_t c_id = column(header, "subject_id", true, path);
  const std::size_t c_label = column(header, "label", true, path);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const Row f = split_csv_line(line, row);
    if (f.size() != header.size()) {
      throw ValidationError(path.string() + " row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " fields");
    }
    labels[f[c_id]] = parse_label(f[c_label], row);
  }
  return labels;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string format_value(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw ContractError("format_value failed");
  return std::string(buf, ptr);
}

std::size_t nearest_bin(std::span<const double> bins, double value) {
  if (bins.empty()) throw ConfigError("discretization bins are empty");
  auto it = std::lower_bound(bins.begin(), bins.end(), value);
  if (it == bins.begin()) return 0;
  if (it == bins.end()) return bins.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - bins.begin());
  const std::size_t lo = hi - 1;
  return (value - bins[lo] <= bins[hi] - value) ? lo : hi;
}

EventVocabulary EventVocabulary::build(
    const std::vector<std::string>& categorical,
    const std::map<std::string, std::vector<double>>& numeric) {
  EventVocabulary v;
  std::set<std::string> bases(categorical.begin(), categorical.end());
  for (const auto& [name, values] : numeric) {
    std::vector<double> b = values;
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    if (b.empty()) throw ConfigError("numeric event '" + name + "' has no values");
    for (double x : b) {
      if (!std::isfinite(x)) throw ValidationError("non-finite value for '" + name + "'");
    }
    v.bins_[name] = std::move(b);
    bases.insert(name);
  }
  std::set<std::string> cats(categorical.begin(), categorical.end());
  for (const auto& base : bases) {
    if (cats.count(base)) v.names_.push_back(base);
    auto it = v.bins_.find(base);
    if (it != v.bins_.end()) {
      for (double x : it->second) v.names_.push_back(base + "=" + format_value(x));
    }
  }
  for (int i = 0; i < v.size(); ++i) {
    if (!v.lookup_.emplace(v.names_[i], i).second) {
      throw ValidationError("duplicate vocabulary entry '" + v.names_[i] + "'");
    }
  }
  return v;
}

const std::string& EventVocabulary::name(int index) const {
  if (index < 0 || index >= size()) throw ContractError("vocabulary index out of range");
  return names_[index];
}

std::optional<int> EventVocabulary::find(std::string_view name) const {
  auto it = lookup_.find(name);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

int EventVocabulary::index_of(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw VocabularyMismatchError("event '" + std::string(name) + "' not in vocabulary");
  return *idx;
}

bool EventVocabulary::is_numeric(std::string_view base) const {
  return bins_.find(std::string(base)) != bins_.end();
}

int EventVocabulary::discretize(std::string_view base, double value) const {
  auto it = bins_.find(std::string(base));
  if (it == bins_.end()) {
    throw VocabularyMismatchError("numeric event '" + std::string(base) + "' not in vocabulary");
  }
  const std::size_t b = nearest_bin(it->second, value);
  return index_of(it->first + "=" + format_value(it->second[b]));
}

std::pair<std::string, std::optional<double>> EventVocabulary::decompose(int index) const {
  const std::string& n = name(index);
  const auto eq = n.rfind('=');
  if (eq != std::string::npos) {
    const std::string base = n.substr(0, eq);
    if (is_numeric(base)) {
      double v = 0.0;
      std::from_chars(n.data() + eq + 1, n.data() + n.size(), v);
      return {base, v};
    }
  }
  return {n, std::nullopt};
}

int discretize_numeric(const EventVocabulary& vocab, std::string_view name, double value) {
  return vocab.discretize(name, value);
}

// ---------------------------------------------------------------------------

void normalize_times(EventSequence& seq) {
  if (seq.events.empty()) return;
  const double shift = 1.0 - seq.events.front().time;
  if (shift != 0.0) {
    for (auto& e : seq.events) e.time += shift;
    seq.events.front().time = 1.0;
  }
  // i-th member of a tie gets i * eps; later events never move backwards.
  for (std::size_t j = 1; j < seq.events.size(); ++j) {
    const double floor = seq.events[j - 1].time + kTieEpsilon;
    if (seq.events[j].time <= seq.events[j - 1].time) {
      seq.events[j].time = std::max(seq.events[j].time, floor);
    }
  }
}

void validate_sequence(const EventSequence& seq, const EventVocabulary& vocab) {
  for (std::size_t j = 0; j < seq.events.size(); ++j) {
    const Event& e = seq.events[j];
    if (!std::isfinite(e.time) || e.time < 0) {
      throw ValidationError(seq.subject_id + ": invalid time at event " + std::to_string(j));
    }
    if (e.type < 0 || e.type >= vocab.size()) {
      throw ValidationError(seq.subject_id + ": type index out of range at event " +
                            std::to_string(j));
    }
    if (j > 0 && !(e.time > seq.events[j - 1].time)) {
      throw ValidationError(seq.subject_id + ": times not strictly increasing at event " +
                            std::to_string(j));
    }
  }
  if (seq.label != 0 && seq.label != 1) throw ValidationError(seq.subject_id + ": bad label");
}

// ---------------------------------------------------------------------------

ParseResult parse_events(const std::filesystem::path& events_csv,
                         const std::filesystem::path& labels_csv, const ParseOptions& options) {
  std::ifstream in = open_input(events_csv);
  std::string line;
  std::vector<RawSubject> raw;
  std::unordered_map<std::string, std::size_t> slot;

  if (std::getline(in, line)) {
    const Row header = split_csv_line(line, 1);
    const std::size_t c_id = column(header, "subject_id", true, events_csv);
    const std::size_t c_time = column(header, "time", true, events_csv);
    const std::size_t c_name = column(header, "event_name", true, events_csv);
    const std::size_t c_value = column(header, "value", false, events_csv);

    std::size_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (trim(line).empty()) continue;
      const Row f = split_csv_line(line, row);
      if (f.size() != header.size()) {
        throw ValidationError(events_csv.string() + " row " + std::to_string(row) +
                              ": expected " + std::to_string(header.size()) + " fields, got " +
                              std::to_string(f.size()));
      }
      RawEvent e;
      e.time = parse_double(f[c_time], row, "time");
      if (e.time < 0) throw ValidationError("row " + std::to_string(row) + ": negative time");
      e.name = f[c_name];
      if (e.name.empty()) throw ValidationError("row " + std::to_string(row) + ": empty name");
      if (c_value != std::string::npos && !f[c_value].empty()) {
        e.value = parse_double(f[c_value], row, "value");
      }
      auto [it, inserted] = slot.emplace(f[c_id], raw.size());
      if (inserted) raw.push_back({f[c_id], {}});
      raw[it->second].events.push_back(std::move(e));
    }
  }

  const bool have_labels = !labels_csv.empty();
  std::map<std::string, int> labels;
  if (have_labels) labels = read_labels(labels_csv);
  return resolve(std::move(raw), labels, have_labels, options);
}

ParseResult parse_events_jsonl(const std::filesystem::path& path, const ParseOptions& options) {
  std::ifstream in = open_input(path);
  std::vector<RawSubject> raw;
  std::map<std::string, int> labels;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      RawSubject s;
      s.id = j.at("subject_id").get<std::string>();
      labels[s.id] = j.value("label", 0);
      for (const auto& ev : j.at("events")) {
        RawEvent e;
        e.time = ev.at("time").get<double>();
        e.name = ev.at("event").get<std::string>();
        if (ev.contains("value") && !ev["value"].is_null()) e.value = ev["value"].get<double>();
        if (!std::isfinite(e.time) || e.time < 0) {
          throw ValidationError("line " + std::to_string(row) + ": invalid time");
        }
        s.events.push_back(std::move(e));
      }
      if (labels[s.id] != 0 && labels[s.id] != 1) {
        throw ValidationError("line " + std::to_string(row) + ": label must be 0 or 1");
      }
      raw.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path.string() + " line " + std::to_string(row) + ": " + e.what());
    }
  }
  return resolve(std::move(raw), labels, true, options);
}

void write_events_csv(const std::filesystem::path& path, std::span<const EventSequence> seqs,
                      const EventVocabulary& vocab) {
  std::ofstream out = open_output(path);
  out << "subject_id,time,event_name,value\n";
  char buf[64];
  for (const auto& s : seqs) {
    for (const auto& e : s.events) {
      auto [base, value] = vocab.decompose(e.type);
      std::snprintf(buf, sizeof(buf), "%.17g", e.time);
      out << s.subject_id << ',' << buf << ',' << base << ',';
      if (value) out << format_value(*value);
      out << '\n';
    }
  }
}

void write_labels_csv(const std::filesystem::path& path, std::span<const EventSequence> seqs) {
  std::ofstream out = open_output(path);
  out << "subject_id,label\n";
  for (const auto& s : seqs) out << s.subject_id << ',' << s.label << '\n';
}

void write_events_jsonl(const std::filesystem::path& path, std::span<const EventSequence> seqs,
                        const EventVocabulary& vocab) {
  std::ofstream out = open_output(path);
  for (const auto& s : seqs) {
    nlohmann::json j;
    j["subject_id"] = s.subject_id;
    j["label"] = s.label;
    j["events"] = nlohmann::json::array();
    for (const auto& e : s.events) {
      auto [base, value] = vocab.decompose(e.type);
      nlohmann::json ev{{"time", e.time}, {"event", base}};
      ev["value"] = value ? nlohmann::json(*value) : nlohmann::json(nullptr);
      j["events"].push_back(std::move(ev));
    }
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------

PaddedBatch pad_batch(std::span<const EventSequence> seqs, int max_len,
                      const EventVocabulary& vocab) {
  const auto B = static_cast<Eigen::Index>(seqs.size());
  PaddedBatch batch;
  batch.times = Eigen::MatrixXd::Zero(B, max_len);
  batch.types = Eigen::MatrixXi::Constant(B, max_len, vocab.pad_index());
  batch.mask.setConstant(B, max_len, false);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& s = seqs[static_cast<std::size_t>(b)];
    const int L = static_cast<int>(s.events.size());
    if (L + 1 > max_len) {
      throw TruncationError(s.subject_id + ": " + std::to_string(L) +
                            " events do not fit max_len " + std::to_string(max_len) +
                            " with END");
    }
    for (int j = 0; j < L; ++j) {
      batch.times(b, j) = s.events[j].time;
      batch.types(b, j) = s.events[j].type;
      batch.mask(b, j) = true;
    }
    batch.times(b, L) = L > 0 ? s.events[L - 1].time : 0.0;
    batch.types(b, L) = vocab.end_index();
    batch.mask(b, L) = true;
    batch.lengths.push_back(L);
  }
  return batch;
}

std::vector<std::vector<Event>> unpad(const PaddedBatch& batch) {
  std::vector<std::vector<Event>> out(static_cast<std::size_t>(batch.times.rows()));
  for (Eigen::Index b = 0; b < batch.times.rows(); ++b) {
    for (int j = 0; j < batch.lengths[b]; ++j) {
      out[b].push_back({batch.times(b, j), batch.types(b, j)});
    }
  }
  return out;
}

double positive_rate(std::span<const EventSequence> seqs) {
  if (seqs.empty()) return 0.0;
  double pos = 0.0;
  for (const auto& s : seqs) pos += s.label;
  return pos / static_cast<double>(seqs.size());
}

SplitResult split(std::span<const EventSequence> seqs, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw SplitError("train_frac must lie strictly between 0 and 1");
  }
  const std::size_t n = seqs.size();
  if (n < 2) throw SplitError("need at least 2 subjects to split, got " + std::to_string(n));
  auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_frac + 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = derive_rng(seed, Stream::kSplit);
  std::shuffle(order.begin(), order.end(), rng);

  SplitResult r;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? r.train : r.test).push_back(seqs[order[i]]);
  }
  r.train_positive_rate = positive_rate(r.train);
  r.test_positive_rate = positive_rate(r.test);
  return r;
}

}  // namespace seqsynth
