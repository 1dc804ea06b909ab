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

#ifndef SVKIT_PREPROCESS_HPP_
#define SVKIT_PREPROCESS_HPP_

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "svkit/archive.hpp"

namespace svkit {

// Affine dimension reduction: v -> basis^T (v - mean), d -> k.
struct Projection {
  Eigen::VectorXd mean;   // d
  Eigen::MatrixXd basis;  // d x k

  int input_dim() const { return static_cast<int>(basis.rows()); }
  int output_dim() const { return static_cast<int>(basis.cols()); }
};

// Empirical between/within scatter, both 1/N normalized (N = utterances):
//   within  = (1/N) sum_s sum_i (x_i - m_s)(x_i - m_s)^T
//   between = (1/N) sum_s n_s (m_s - m)(m_s - m)^T
// so between + within equals the total covariance around the global mean.
struct ScatterPair {
  Eigen::MatrixXd between;  // d x d
  Eigen::MatrixXd within;   // d x d
  Eigen::VectorXd mean;     // d
  int n_speakers = 0;
  long n_utterances = 0;
};

// Scales v to norm sqrt(d), preserving direction. Throws ZeroVector on ||v||=0.
Eigen::VectorXd length_normalize(const Eigen::VectorXd& v);

// Applies length_normalize to every record.
EmbeddingArchive length_normalize(const EmbeddingArchive& archive);

// Class-wise scatter from row data; class_ids[i] in [0, n_classes).
ScatterPair compute_scatter(const Eigen::MatrixXd& rows,
                            const std::vector<int>& class_ids);

// Scatter of a fully labeled archive. Throws MissingLabel / InsufficientClasses.
ScatterPair compute_scatter(const EmbeddingArchive& archive);

// LDA by generalized eigenvectors of (between, within_reg) where
// within_reg = within + 1e-6 * trace(within)/d * I. With diag_within, the
// within scatter is reduced to its diagonal before regularizing. Columns are
// sorted by decreasing eigenvalue and normalized so col^T within_reg col = 1;
// signs are fixed so each column's largest-magnitude entry is positive.
Projection fit_lda(const ScatterPair& scatter, int k, bool diag_within);
Projection fit_lda(const EmbeddingArchive& archive, int k, bool diag_within);

// basis^T (v - mean) per record; ids and labels preserved.
EmbeddingArchive apply_projection(const Projection& projection,
                                  const EmbeddingArchive& archive);

// Subtracts the given mean (or the archive mean when absent); returns the
// centered archive and the mean that was used.
std::pair<EmbeddingArchive, Eigen::VectorXd> center(
    const EmbeddingArchive& archive,
    const std::optional<Eigen::VectorXd>& mean = std::nullopt);

// PRJ1 binary format: magic "PRJ1" | u32le d | u32le k | mean f64le |
// basis column-major f64le.
Projection read_projection(const std::string& path);
void write_projection(const Projection& projection, const std::string& path);

}  // namespace svkit

#endif  // SVKIT_PREPROCESS_HPP_
