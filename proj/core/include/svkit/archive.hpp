// Copyright (c) 2026 The svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SVKIT_ARCHIVE_HPP_
#define SVKIT_ARCHIVE_HPP_

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "svkit/error.hpp"

namespace svkit {

// One identified embedding vector with an optional speaker label.
// Vectors are held as doubles internally; the binary format stores float32.
struct Embedding {
  std::string id;
  std::optional<std::string> speaker;
  Eigen::VectorXd vec;
};

struct EmbeddingArchive {
  int dim = 0;
  std::vector<Embedding> records;

  // Row i is records[i].vec.
  Eigen::MatrixXd matrix() const;

  // id -> record index. Ids are unique by invariant.
  std::unordered_map<std::string, int> index() const;

  bool all_labeled() const;
};

// Validates the archive invariants (consistent dim, finite values, unique
// ids) and throws on violation. Readers call this; builders of synthetic
// archives may call it too.
void validate_archive(const EmbeddingArchive& archive);

enum class TrialLabel { kTarget, kNontarget, kUnknown };

struct Trial {
  std::string enroll_id;
  std::string test_id;
  TrialLabel label = TrialLabel::kUnknown;
};

struct ScoredTrial {
  Trial trial;
  double score = 0.0;
};

struct ScoreSet {
  std::vector<ScoredTrial> entries;
};

// --- text archive format ---------------------------------------------------
// Header line:   EMBT <dim> labeled|unlabeled
// Record lines:  id [speaker] v1 v2 ... vd      (whitespace separated)
// The speaker column is present iff the header says "labeled".
EmbeddingArchive read_archive_text(const std::string& path);
void write_archive_text(const EmbeddingArchive& archive, const std::string& path);

// --- binary archive format (EMB1) -------------------------------------------
// magic "EMB1" | u32le dim | u32le count | per record:
//   u16le id_len, id bytes, u16le speaker_len (0 = absent), speaker bytes,
//   dim float32le values.
// write(read(f)) reproduces f byte for byte; values round-trip at float32
// precision while in-memory arithmetic stays double.
EmbeddingArchive read_archive_binary(const std::string& path);
void write_archive_binary(const EmbeddingArchive& archive, const std::string& path);

// Sniffs the 4-byte magic ("EMB1" binary, "EMBT" text) and dispatches.
EmbeddingArchive read_archive(const std::string& path);

// --- trial list --------------------------------------------------------------
// One trial per line: enroll_id test_id [target|nontarget]
std::vector<Trial> read_trials(const std::string& path);
void write_trials(const std::vector<Trial>& trials, const std::string& path);

// --- score file --------------------------------------------------------------
// One entry per line: enroll_id test_id score [target|nontarget], score
// formatted "%.6f".
ScoreSet read_scores(const std::string& path);
void write_scores(const ScoreSet& scores, const std::string& path);

const char* to_string(TrialLabel label);

}  // namespace svkit

#endif  // SVKIT_ARCHIVE_HPP_
