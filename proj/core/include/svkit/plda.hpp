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

#ifndef SVKIT_PLDA_HPP_
#define SVKIT_PLDA_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "svkit/archive.hpp"

namespace svkit {

// Two-covariance PLDA: an embedding decomposes as mu + h + e with a latent
// speaker offset h ~ N(0, phi_b) and residual e ~ N(0, phi_w). With
// diag_constrained, phi_w is diagonal (off-diagonals exactly zero).
struct PldaModel {
  Eigen::VectorXd mu;
  Eigen::MatrixXd phi_b;  // between-speaker covariance, symmetric PSD
  Eigen::MatrixXd phi_w;  // within-speaker covariance, symmetric PD
  bool diag_constrained = false;

  int dim() const { return static_cast<int>(mu.size()); }
};

struct EmConfig {
  int iterations = 20;
  bool diag_within = false;
  std::uint64_t seed = 0;  // jitter for rank-deficient scatter init only
};

struct PldaFit {
  PldaModel model;
  // Marginal data log-likelihood evaluated after each M-step; non-decreasing
  // for the unconstrained model (up to fp noise).
  std::vector<double> loglik;
  std::vector<std::string> warnings;
};

PldaFit fit_plda(const EmbeddingArchive& archive, const EmConfig& config);

// Precomputed Cholesky factorizations for O(d^2) per-trial scoring. The
// factored matrices are phi_w, phi_b + phi_w and 2*phi_b + phi_w (the block
// covariance of Eq.-style joint pairs diagonalizes into the last two under
// the sum/difference change of basis, see plda.cc).
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel& model);

  // log p(e,t) - log p(e) - log p(t); bit-exact under swapping e and t.
  double score(const Eigen::VectorXd& enroll, const Eigen::VectorXd& test) const;

  ScoreSet score_trials(const EmbeddingArchive& archive,
                        const std::vector<Trial>& trials) const;

 private:
  double pair_quadratics(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;

  Eigen::VectorXd mu_;
  Eigen::LLT<Eigen::MatrixXd> tot_llt_;   // phi_b + phi_w
  Eigen::LLT<Eigen::MatrixXd> sum_llt_;   // 2*phi_b + phi_w
  Eigen::LLT<Eigen::MatrixXd> diff_llt_;  // phi_w
  double logdet_const_ = 0.0;
};

// Convenience single-pair scoring (builds a PldaScorer per call).
double score_llr(const PldaModel& model, const Eigen::VectorXd& enroll,
                 const Eigen::VectorXd& test);

ScoreSet score_trials(const PldaModel& model, const EmbeddingArchive& archive,
                      const std::vector<Trial>& trials);

// Marginal log-likelihood of a labeled archive under the model (the quantity
// fit_plda tracks per iteration). Exposed for diagnostics and tests.
double marginal_loglik(const PldaModel& model, const EmbeddingArchive& archive);

// Per-dimension covariance diagnostics, sorted by descending between value.
struct CovarianceDiagRow {
  int rank = 0;       // 1-based position after sorting
  int dim_index = 0;  // original dimension
  double between = 0.0;
  double within = 0.0;
};

std::vector<CovarianceDiagRow> diagnose_covariances(const Eigen::MatrixXd& between,
                                                    const Eigen::MatrixXd& within);
std::vector<CovarianceDiagRow> diagnose_covariances(const PldaModel& model);

// CSV with columns rank,dim_index,between,within,log10_between,log10_within;
// log10 of a non-positive value is written as "-inf".
std::string diagnostics_csv(const std::vector<CovarianceDiagRow>& rows);

// PLDA1 binary format: magic "PLDA1" | u32le d | u8 diag flag | mu f64le |
// phi_b row-major f64le | phi_w row-major f64le.
PldaModel read_plda(const std::string& path);
void write_plda(const PldaModel& model, const std::string& path);

}  // namespace svkit

#endif  // SVKIT_PLDA_HPP_
