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

#include "svkit/archive.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace svkit {

namespace {

constexpr char kBinaryMagic[4] = {'E', 'M', 'B', '1'};
constexpr char kTextMagic[4] = {'E', 'M', 'B', 'T'};

std::string at_line(const std::string& path, int line) {
  return path + ":" + std::to_string(line);
}

double parse_component(const std::string& token, const std::string& path,
                       int line) {
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &pos);
  } catch (const std::exception&) {
    throw Error(ErrorCode::NonFinite,
                "non-numeric component '" + token + "' at " + at_line(path, line));
  }
  if (pos != token.size()) {
    throw Error(ErrorCode::NonFinite,
                "non-numeric component '" + token + "' at " + at_line(path, line));
  }
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::NonFinite,
                "non-finite component at " + at_line(path, line));
  }
  return value;
}

template <typename T>
void write_le(std::ostream& os, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const std::string& path) {
  unsigned char bytes[sizeof(T)];
  is.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (is.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw Error(ErrorCode::CorruptArchive, "truncated record in " + path);
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::string read_bytes(std::istream& is, std::size_t n, const std::string& path) {
  std::string buf(n, '\0');
  if (n > 0) {
    is.read(buf.data(), static_cast<std::streamsize>(n));
    if (is.gcount() != static_cast<std::streamsize>(n)) {
      throw Error(ErrorCode::CorruptArchive, "truncated record in " + path);
    }
  }
  return buf;
}

TrialLabel parse_label(const std::string& token, const std::string& path,
                       int line) {
  if (token == "target") return TrialLabel::kTarget;
  if (token == "nontarget") return TrialLabel::kNontarget;
  throw Error(ErrorCode::BadLabel,
              "label '" + token + "' at " + at_line(path, line) +
                  " (expected target|nontarget)");
}

std::ifstream open_input(const std::string& path, bool binary) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) {
    throw Error(ErrorCode::IoError, "cannot open " + path);
  }
  return is;
}

std::ofstream open_output(const std::string& path, bool binary) {
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) {
    throw Error(ErrorCode::IoError, "cannot write " + path);
  }
  return os;
}

}  // namespace

Eigen::MatrixXd EmbeddingArchive::matrix() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(records.size()), dim);
  for (std::size_t i = 0; i < records.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = records[i].vec.transpose();
  }
  return m;
}

std::unordered_map<std::string, int> EmbeddingArchive::index() const {
  std::unordered_map<std::string, int> map;
  map.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    map.emplace(records[i].id, static_cast<int>(i));
  }
  return map;
}

bool EmbeddingArchive::all_labeled() const {
  for (const auto& rec : records) {
    if (!rec.speaker.has_value()) return false;
  }
  return true;
}

void validate_archive(const EmbeddingArchive& archive) {
  if (archive.dim < 1) {
    throw Error(ErrorCode::DimensionMismatch, "archive dim must be >= 1");
  }
  std::unordered_map<std::string, int> seen;
  seen.reserve(archive.records.size());
  for (std::size_t i = 0; i < archive.records.size(); ++i) {
    const Embedding& rec = archive.records[i];
    if (rec.vec.size() != archive.dim) {
      throw Error(ErrorCode::DimensionMismatch,
                  "record '" + rec.id + "' has dim " +
                      std::to_string(rec.vec.size()) + ", archive dim " +
                      std::to_string(archive.dim));
    }
    if (!rec.vec.allFinite()) {
      throw Error(ErrorCode::NonFinite, "record '" + rec.id + "' has non-finite values");
    }
    if (!seen.emplace(rec.id, static_cast<int>(i)).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate id '" + rec.id + "'");
    }
  }
}

EmbeddingArchive read_archive_text(const std::string& path) {
  std::ifstream is = open_input(path, false);
  std::string header;
  if (!std::getline(is, header)) {
    throw Error(ErrorCode::UnsupportedFormat, "empty file " + path);
  }
  std::istringstream hs(header);
  std::string magic, mode;
  int dim = 0;
  if (!(hs >> magic >> dim >> mode) || magic != "EMBT" ||
      (mode != "labeled" && mode != "unlabeled")) {
    throw Error(ErrorCode::UnsupportedFormat,
                "bad header in " + path + " (expected 'EMBT <dim> labeled|unlabeled')");
  }
  if (dim < 1) {
    throw Error(ErrorCode::DimensionMismatch, "dim must be >= 1 in " + path);
  }
  const bool labeled = (mode == "labeled");

  EmbeddingArchive archive;
  archive.dim = dim;
  std::unordered_map<std::string, int> seen;
  std::string line;
  int line_no = 0;  // data lines, header excluded
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    if (tokens.empty()) continue;

    const std::size_t meta = labeled ? 2 : 1;
    if (tokens.size() != meta + static_cast<std::size_t>(dim)) {
      throw Error(ErrorCode::DimensionMismatch,
                  "expected " + std::to_string(dim) + " components at " +
                      at_line(path, line_no) + ", got " +
                      std::to_string(tokens.size() >= meta ? tokens.size() - meta : 0));
    }
    Embedding rec;
    rec.id = tokens[0];
    if (labeled) rec.speaker = tokens[1];
    rec.vec.resize(dim);
    for (int j = 0; j < dim; ++j) {
      rec.vec[j] = parse_component(tokens[meta + j], path, line_no);
    }
    if (!seen.emplace(rec.id, line_no).second) {
      throw Error(ErrorCode::DuplicateId,
                  "duplicate id '" + rec.id + "' at " + at_line(path, line_no));
    }
    archive.records.push_back(std::move(rec));
  }
  return archive;
}

void write_archive_text(const EmbeddingArchive& archive, const std::string& path) {
  validate_archive(archive);
  const bool labeled = archive.all_labeled();
  std::ofstream os = open_output(path, false);
  os << "EMBT " << archive.dim << (labeled ? " labeled" : " unlabeled") << "\n";
  char buf[40];
  for (const auto& rec : archive.records) {
    os << rec.id;
    if (labeled) os << ' ' << *rec.speaker;
    for (int j = 0; j < archive.dim; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", rec.vec[j]);
      os << ' ' << buf;
    }
    os << '\n';
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path);
}

EmbeddingArchive read_archive_binary(const std::string& path) {
  std::ifstream is = open_input(path, true);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, kBinaryMagic, 4) != 0) {
    throw Error(ErrorCode::UnsupportedFormat, "bad magic in " + path);
  }
  const auto dim = read_le<std::uint32_t>(is, path);
  const auto count = read_le<std::uint32_t>(is, path);
  if (dim < 1) {
    throw Error(ErrorCode::DimensionMismatch, "dim must be >= 1 in " + path);
  }

  EmbeddingArchive archive;
  archive.dim = static_cast<int>(dim);
  archive.records.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    Embedding rec;
    const auto id_len = read_le<std::uint16_t>(is, path);
    rec.id = read_bytes(is, id_len, path);
    const auto spk_len = read_le<std::uint16_t>(is, path);
    if (spk_len > 0) rec.speaker = read_bytes(is, spk_len, path);
    rec.vec.resize(archive.dim);
    for (std::uint32_t j = 0; j < dim; ++j) {
      rec.vec[j] = static_cast<double>(read_le<float>(is, path));
    }
    archive.records.push_back(std::move(rec));
  }
  validate_archive(archive);
  return archive;
}

void write_archive_binary(const EmbeddingArchive& archive, const std::string& path) {
  validate_archive(archive);
  std::ofstream os = open_output(path, true);
  os.write(kBinaryMagic, 4);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(archive.dim));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(archive.records.size()));
  for (const auto& rec : archive.records) {
    if (rec.id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorCode::IoError, "id too long for EMB1: " + rec.id.substr(0, 32));
    }
    write_le<std::uint16_t>(os, static_cast<std::uint16_t>(rec.id.size()));
    os.write(rec.id.data(), static_cast<std::streamsize>(rec.id.size()));
    const std::string spk = rec.speaker.value_or("");
    if (spk.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorCode::IoError, "speaker label too long for EMB1");
    }
    write_le<std::uint16_t>(os, static_cast<std::uint16_t>(spk.size()));
    os.write(spk.data(), static_cast<std::streamsize>(spk.size()));
    for (int j = 0; j < archive.dim; ++j) {
      write_le<float>(os, static_cast<float>(rec.vec[j]));
    }
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path);
}

EmbeddingArchive read_archive(const std::string& path) {
  {
    std::ifstream is = open_input(path, true);
    char magic[4] = {0, 0, 0, 0};
    is.read(magic, 4);
    if (is.gcount() == 4 && std::memcmp(magic, kBinaryMagic, 4) == 0) {
      return read_archive_binary(path);
    }
    if (is.gcount() == 4 && std::memcmp(magic, kTextMagic, 4) == 0) {
      return read_archive_text(path);
    }
  }
  throw Error(ErrorCode::UnsupportedFormat,
              path + " is neither an EMB1 nor an EMBT archive");
}

std::vector<Trial> read_trials(const std::string& path) {
  std::ifstream is = open_input(path, false);
  std::vector<Trial> trials;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (tokens.size() < 2 || tokens.size() > 3) {
      throw Error(ErrorCode::BadLabel,
                  "expected 'enroll test [target|nontarget]' at " + at_line(path, line_no));
    }
    Trial t;
    t.enroll_id = tokens[0];
    t.test_id = tokens[1];
    if (tokens.size() == 3) t.label = parse_label(tokens[2], path, line_no);
    trials.push_back(std::move(t));
  }
  return trials;
}

void write_trials(const std::vector<Trial>& trials, const std::string& path) {
  std::ofstream os = open_output(path, false);
  for (const auto& t : trials) {
    os << t.enroll_id << ' ' << t.test_id;
    if (t.label != TrialLabel::kUnknown) os << ' ' << to_string(t.label);
    os << '\n';
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path);
}

ScoreSet read_scores(const std::string& path) {
  std::ifstream is = open_input(path, false);
  ScoreSet scores;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (tokens.size() < 3 || tokens.size() > 4) {
      throw Error(ErrorCode::BadLabel,
                  "expected 'enroll test score [target|nontarget]' at " +
                      at_line(path, line_no));
    }
    ScoredTrial entry;
    entry.trial.enroll_id = tokens[0];
    entry.trial.test_id = tokens[1];
    entry.score = parse_component(tokens[2], path, line_no);
    if (tokens.size() == 4) entry.trial.label = parse_label(tokens[3], path, line_no);
    scores.entries.push_back(std::move(entry));
  }
  return scores;
}

void write_scores(const ScoreSet& scores, const std::string& path) {
  std::ofstream os = open_output(path, false);
  char buf[40];
  for (const auto& entry : scores.entries) {
    std::snprintf(buf, sizeof(buf), "%.6f", entry.score);
    os << entry.trial.enroll_id << ' ' << entry.trial.test_id << ' ' << buf;
    if (entry.trial.label != TrialLabel::kUnknown) {
      os << ' ' << to_string(entry.trial.label);
    }
    os << '\n';
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path);
}

const char* to_string(TrialLabel label) {
  switch (label) {
    case TrialLabel::kTarget: return "target";
    case TrialLabel::kNontarget: return "nontarget";
    case TrialLabel::kUnknown: return "unknown";
  }
  return "unknown";
}

}  // namespace svkit
