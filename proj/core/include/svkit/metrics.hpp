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

#ifndef SVKIT_METRICS_HPP_
#define SVKIT_METRICS_HPP_

#include <vector>

#include "svkit/archive.hpp"

namespace svkit {

struct DcfParams {
  double p_target = 0.01;
  double c_miss = 1.0;
  double c_fa = 1.0;
};

struct DetPoint {
  double threshold = 0.0;
  double p_miss = 0.0;  // fraction of target scores < threshold
  double p_fa = 0.0;    // fraction of nontarget scores >= threshold
};

// Operating points swept at every distinct score, in ascending threshold
// order, plus a reject-everything point at +infinity. Ties (score ==
// threshold) count as accepts. p_miss is non-decreasing and p_fa
// non-increasing along the sweep.
struct DetCurve {
  std::vector<DetPoint> points;
};

DetCurve det_curve(const ScoreSet& scores);

// Rate at which p_miss = p_fa, linearly interpolated between the two
// adjacent operating points that bracket the sign change of p_miss - p_fa.
// Separable scores give 0; fully inverted scores give 1.
double eer(const ScoreSet& scores);
double eer(const DetCurve& curve);

struct MinDcfResult {
  double min_dcf = 0.0;
  double threshold = 0.0;  // argmin; +inf when rejecting everything is best
};

// min over the DET curve of
//   [c_miss p_target p_miss + c_fa (1-p_target) p_fa]
//     / min(c_miss p_target, c_fa (1-p_target));
// the normalizer puts the best trivial system at 1.0.
MinDcfResult min_dcf(const ScoreSet& scores, const DcfParams& params);
MinDcfResult min_dcf(const DetCurve& curve, const DcfParams& params);

// (n_target, n_nontarget); throws on unknown labels or a missing class.
std::pair<long, long> count_labels(const ScoreSet& scores);

}  // namespace svkit

#endif  // SVKIT_METRICS_HPP_
