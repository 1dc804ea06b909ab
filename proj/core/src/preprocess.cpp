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

#include "svkit/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>

namespace svkit {

namespace {

constexpr double kWithinRidge = 1e-6;

// Labels archive records with dense class ids in order of first appearance.
std::vector<int> class_ids_of(const EmbeddingArchive& archive) {
  std::vector<int> ids;
  ids.reserve(archive.records.size());
  std::map<std::string, int> speakers;
  for (const auto& rec : archive.records) {
    if (!rec.speaker.has_value()) {
      throw Error(ErrorCode::MissingLabel, "record '" + rec.id + "' has no speaker label");
    }
    auto [it, inserted] = speakers.emplace(*rec.speaker, static_cast<int>(speakers.size()));
    ids.push_back(it->second);
  }
  return ids;
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
    throw Error(ErrorCode::CorruptArchive, "truncated projection file " + path);
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

Eigen::VectorXd length_normalize(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (norm == 0.0) {
    throw Error(ErrorCode::ZeroVector, "cannot length-normalize the zero vector");
  }
  return v * (std::sqrt(static_cast<double>(v.size())) / norm);
}

EmbeddingArchive length_normalize(const EmbeddingArchive& archive) {
  EmbeddingArchive out = archive;
  for (auto& rec : out.records) {
    if (rec.vec.norm() == 0.0) {
      throw Error(ErrorCode::ZeroVector, "zero vector for id '" + rec.id + "'");
    }
    rec.vec = length_normalize(rec.vec);
  }
  return out;
}

ScatterPair compute_scatter(const Eigen::MatrixXd& rows,
                            const std::vector<int>& class_ids) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index d = rows.cols();
  if (n == 0 || static_cast<std::size_t>(n) != class_ids.size()) {
    throw Error(ErrorCode::DimensionMismatch, "rows and class_ids disagree");
  }
  const int n_classes = 1 + *std::max_element(class_ids.begin(), class_ids.end());
  if (n_classes < 2) {
    throw Error(ErrorCode::InsufficientClasses, "scatter needs >= 2 speakers");
  }

  Eigen::MatrixXd class_sums = Eigen::MatrixXd::Zero(n_classes, d);
  Eigen::VectorXd class_counts = Eigen::VectorXd::Zero(n_classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = class_ids[static_cast<std::size_t>(i)];
    if (c < 0) throw Error(ErrorCode::BadLabel, "negative class id");
    class_sums.row(c) += rows.row(i);
    class_counts[c] += 1.0;
  }
  if ((class_counts.array() == 0.0).any()) {
    throw Error(ErrorCode::BadLabel, "class ids must be dense in [0, n_classes)");
  }

  ScatterPair scatter;
  scatter.mean = rows.colwise().mean();
  scatter.n_speakers = n_classes;
  scatter.n_utterances = static_cast<long>(n);

  Eigen::MatrixXd class_means(n_classes, d);
  for (int c = 0; c < n_classes; ++c) {
    class_means.row(c) = class_sums.row(c) / class_counts[c];
  }

  Eigen::MatrixXd within = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd dev =
        rows.row(i).transpose() - class_means.row(class_ids[static_cast<std::size_t>(i)]).transpose();
    within.noalias() += dev * dev.transpose();
  }
  Eigen::MatrixXd between = Eigen::MatrixXd::Zero(d, d);
  for (int c = 0; c < n_classes; ++c) {
    const Eigen::VectorXd dev = class_means.row(c).transpose() - scatter.mean;
    between.noalias() += class_counts[c] * dev * dev.transpose();
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  scatter.within = 0.5 * inv_n * (within + within.transpose());
  scatter.between = 0.5 * inv_n * (between + between.transpose());
  return scatter;
}

ScatterPair compute_scatter(const EmbeddingArchive& archive) {
  if (archive.records.empty()) {
    throw Error(ErrorCode::InsufficientClasses, "empty archive");
  }
  return compute_scatter(archive.matrix(), class_ids_of(archive));
}

Projection fit_lda(const ScatterPair& scatter, int k, bool diag_within) {
  const int d = static_cast<int>(scatter.within.rows());
  const int max_rank = std::min(d, scatter.n_speakers - 1);
  if (k < 1 || k > max_rank) {
    throw Error(ErrorCode::BadRank,
                "k=" + std::to_string(k) + " outside [1, " + std::to_string(max_rank) +
                    "] (d=" + std::to_string(d) + ", speakers=" +
                    std::to_string(scatter.n_speakers) + ")");
  }

  Eigen::MatrixXd within = scatter.within;
  if (diag_within) {
    const Eigen::VectorXd diag = within.diagonal();
    within = diag.asDiagonal();
  }
  const double ridge = kWithinRidge * within.trace() / d;
  Eigen::MatrixXd within_reg = within + ridge * Eigen::MatrixXd::Identity(d, d);

  // Whiten with the Cholesky factor of within_reg, then take the top
  // eigenvectors of the whitened between scatter.
  Eigen::LLT<Eigen::MatrixXd> llt(within_reg);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularScatter, "within scatter is singular after regularization");
  }
  const Eigen::MatrixXd whitened =
      llt.matrixL().solve(llt.matrixL().solve(scatter.between).transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      0.5 * (whitened + whitened.transpose()));
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularScatter, "eigendecomposition failed");
  }

  Projection projection;
  projection.mean = scatter.mean;
  projection.basis.resize(d, k);
  // Eigen orders eigenvalues ascending; take the top k from the back.
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd col =
        llt.matrixL().transpose().solve(eig.eigenvectors().col(d - 1 - j));
    int arg_max = 0;
    col.cwiseAbs().maxCoeff(&arg_max);
    if (col[arg_max] < 0.0) col = -col;
    projection.basis.col(j) = col;
  }
  return projection;
}

Projection fit_lda(const EmbeddingArchive& archive, int k, bool diag_within) {
  return fit_lda(compute_scatter(archive), k, diag_within);
}

EmbeddingArchive apply_projection(const Projection& projection,
                                  const EmbeddingArchive& archive) {
  if (archive.dim != projection.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "archive dim " + std::to_string(archive.dim) + " != projection input dim " +
                    std::to_string(projection.input_dim()));
  }
  EmbeddingArchive out;
  out.dim = projection.output_dim();
  out.records.reserve(archive.records.size());
  for (const auto& rec : archive.records) {
    Embedding mapped;
    mapped.id = rec.id;
    mapped.speaker = rec.speaker;
    mapped.vec.noalias() = projection.basis.transpose() * (rec.vec - projection.mean);
    out.records.push_back(std::move(mapped));
  }
  return out;
}

std::pair<EmbeddingArchive, Eigen::VectorXd> center(
    const EmbeddingArchive& archive, const std::optional<Eigen::VectorXd>& mean) {
  Eigen::VectorXd used = Eigen::VectorXd::Zero(archive.dim);
  if (mean.has_value()) {
    if (mean->size() != archive.dim) {
      throw Error(ErrorCode::DimensionMismatch,
                  "mean dim " + std::to_string(mean->size()) + " != archive dim " +
                      std::to_string(archive.dim));
    }
    used = *mean;
  } else if (!archive.records.empty()) {
    for (const auto& rec : archive.records) used += rec.vec;
    used /= static_cast<double>(archive.records.size());
  }
  EmbeddingArchive out = archive;
  for (auto& rec : out.records) rec.vec -= used;
  return {std::move(out), std::move(used)};
}

Projection read_projection(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, "PRJ1", 4) != 0) {
    throw Error(ErrorCode::UnsupportedFormat, "bad magic in " + path);
  }
  const auto d = read_le<std::uint32_t>(is, path);
  const auto k = read_le<std::uint32_t>(is, path);
  if (d < 1 || k < 1 || k > d) {
    throw Error(ErrorCode::CorruptArchive, "bad dimensions in " + path);
  }
  Projection projection;
  projection.mean.resize(d);
  for (std::uint32_t i = 0; i < d; ++i) projection.mean[i] = read_le<double>(is, path);
  projection.basis.resize(d, k);
  for (std::uint32_t j = 0; j < k; ++j) {
    for (std::uint32_t i = 0; i < d; ++i) {
      projection.basis(i, j) = read_le<double>(is, path);
    }
  }
  if (!projection.mean.allFinite() || !projection.basis.allFinite()) {
    throw Error(ErrorCode::NonFinite, "non-finite projection in " + path);
  }
  return projection;
}

void write_projection(const Projection& projection, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path);
  os.write("PRJ1", 4);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(projection.input_dim()));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(projection.output_dim()));
  for (int i = 0; i < projection.input_dim(); ++i) {
    write_le<double>(os, projection.mean[i]);
  }
  for (int j = 0; j < projection.output_dim(); ++j) {
    for (int i = 0; i < projection.input_dim(); ++i) {
      write_le<double>(os, projection.basis(i, j));
    }
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path);
}

}  // namespace svkit
