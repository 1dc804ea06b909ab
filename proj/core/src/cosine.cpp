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

#include "svkit/cosine.hpp"

#include <algorithm>

namespace svkit {

namespace {

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

double cosine_score(const Eigen::VectorXd& enroll, const Eigen::VectorXd& test) {
  if (enroll.size() != test.size()) {
    throw Error(ErrorCode::DimensionMismatch, "cosine_score: dims differ");
  }
  const double ne = enroll.norm();
  const double nt = test.norm();
  if (ne == 0.0 || nt == 0.0) {
    throw Error(ErrorCode::ZeroVector, "cosine_score: zero-norm input");
  }
  return clamp_unit(enroll.dot(test) / (ne * nt));
}

ScoreSet cosine_score_trials(const EmbeddingArchive& archive,
                             const std::vector<Trial>& trials) {
  const auto index = archive.index();
  const Eigen::Index n = static_cast<Eigen::Index>(archive.records.size());
  Eigen::MatrixXd unit(archive.dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Embedding& rec = archive.records[static_cast<std::size_t>(i)];
    const double norm = rec.vec.norm();
    if (norm == 0.0) {
      throw Error(ErrorCode::ZeroVector, "zero vector for id '" + rec.id + "'");
    }
    unit.col(i) = rec.vec / norm;
  }

  ScoreSet scores;
  scores.entries.reserve(trials.size());
  for (std::size_t t = 0; t < trials.size(); ++t) {
    const auto e_it = index.find(trials[t].enroll_id);
    const auto t_it = index.find(trials[t].test_id);
    if (e_it == index.end() || t_it == index.end()) {
      const std::string& missing =
          (e_it == index.end()) ? trials[t].enroll_id : trials[t].test_id;
      throw Error(ErrorCode::UnknownId,
                  "trial " + std::to_string(t) + " references unknown id '" + missing + "'");
    }
    const double score = clamp_unit(unit.col(e_it->second).dot(unit.col(t_it->second)));
    scores.entries.push_back({trials[t], score});
  }
  return scores;
}

}  // namespace svkit
