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

#ifndef SVKIT_COSINE_HPP_
#define SVKIT_COSINE_HPP_

#include <Eigen/Dense>
#include <vector>

#include "svkit/archive.hpp"

namespace svkit {

// <e,t> / (||e|| ||t||), clamped into [-1, 1]. Throws ZeroVector.
double cosine_score(const Eigen::VectorXd& enroll, const Eigen::VectorXd& test);

// Per-trial cosine scores; embeddings are unit-normalized once so each trial
// costs one dot product.
ScoreSet cosine_score_trials(const EmbeddingArchive& archive,
                             const std::vector<Trial>& trials);

}  // namespace svkit

#endif  // SVKIT_COSINE_HPP_
