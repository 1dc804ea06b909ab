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

#ifndef SVKIT_SYNTH_HPP_
#define SVKIT_SYNTH_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "svkit/archive.hpp"

namespace svkit {

// Generator specification: per speaker draw h ~ N(0, phi_b); per utterance
// phi = mu + h + n with n ~ N(0, phi_w). Fully determined by the seed.
struct SynthSpec {
  int dim = 0;
  int n_speakers = 200;
  int utts_per_speaker = 10;
  Eigen::MatrixXd phi_b;
  Eigen::MatrixXd phi_w;
  Eigen::VectorXd mu;
  std::uint64_t seed = 0;
};

// Samples a labeled archive. Speaker ids are "spk%05d", utterance ids
// "spk%05d-u%03d". Draw order: for each speaker, d gaussians for h, then per
// utterance d gaussians for the residual, all from one xoshiro256++ stream
// seeded with spec.seed. Covariances may be singular PSD (zero is fine);
// genuinely indefinite ones raise SingularCovariance.
EmbeddingArchive sample_dataset(const SynthSpec& spec);

// Named covariance regimes, d >= 4:
//  - "conventional": within-speaker eigenvalues (log ramp 6.0 -> 0.5)
//    dominate in trace and are conjugated by a seeded random orthogonal
//    matrix, putting off-diagonal structure into the coordinate frame;
//    between-speaker eigenvalues (log ramp 8.0 -> 0.05) stay diagonal and
//    concentrate in a few coordinates.
//  - "large-margin": diagonal covariances, between spread evenly on a log
//    ramp 0.5 -> 0.3, within on a steeper log ramp 0.4 -> 0.12 below it, so
//    between > within in every dimension.
SynthSpec preset(const std::string& name, int d, std::uint64_t seed);

// Seeded trial sampling from a labeled archive: n_target same-speaker pairs
// of distinct utterances and n_nontarget cross-speaker pairs, labeled.
std::vector<Trial> sample_trials(const EmbeddingArchive& archive, int n_target,
                                 int n_nontarget, std::uint64_t seed);

}  // namespace svkit

#endif  // SVKIT_SYNTH_HPP_
