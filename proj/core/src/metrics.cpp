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

#include "svkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace svkit {

namespace {

struct SplitScores {
  std::vector<double> target;     // sorted ascending
  std::vector<double> nontarget;  // sorted ascending
};

SplitScores split_scores(const ScoreSet& scores) {
  SplitScores split;
  for (const auto& entry : scores.entries) {
    switch (entry.trial.label) {
      case TrialLabel::kTarget:
        split.target.push_back(entry.score);
        break;
      case TrialLabel::kNontarget:
        split.nontarget.push_back(entry.score);
        break;
      case TrialLabel::kUnknown:
        throw Error(ErrorCode::UnlabeledTrial,
                    "trial " + entry.trial.enroll_id + " " + entry.trial.test_id +
                        " has no label");
    }
  }
  if (split.target.empty() || split.nontarget.empty()) {
    throw Error(ErrorCode::DegenerateTrialSet,
                "need at least one target and one nontarget trial");
  }
  std::sort(split.target.begin(), split.target.end());
  std::sort(split.nontarget.begin(), split.nontarget.end());
  return split;
}

}  // namespace

DetCurve det_curve(const ScoreSet& scores) {
  const SplitScores split = split_scores(scores);
  std::vector<double> thresholds;
  thresholds.reserve(split.target.size() + split.nontarget.size());
  thresholds.insert(thresholds.end(), split.target.begin(), split.target.end());
  thresholds.insert(thresholds.end(), split.nontarget.begin(), split.nontarget.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double n_target = static_cast<double>(split.target.size());
  const double n_nontarget = static_cast<double>(split.nontarget.size());

  DetCurve curve;
  curve.points.reserve(thresholds.size() + 1);
  for (const double threshold : thresholds) {
    DetPoint point;
    point.threshold = threshold;
    const auto missed = std::lower_bound(split.target.begin(), split.target.end(), threshold);
    point.p_miss = static_cast<double>(missed - split.target.begin()) / n_target;
    const auto accepted =
        std::lower_bound(split.nontarget.begin(), split.nontarget.end(), threshold);
    point.p_fa =
        static_cast<double>(split.nontarget.end() - accepted) / n_nontarget;
    curve.points.push_back(point);
  }
  curve.points.push_back({std::numeric_limits<double>::infinity(), 1.0, 0.0});
  return curve;
}

double eer(const DetCurve& curve) {
  // p_miss - p_fa is non-decreasing along the sweep, from -1 (accept all)
  // to +1 (reject all), so a crossing always exists.
  for (std::size_t k = 0; k < curve.points.size(); ++k) {
    const double diff = curve.points[k].p_miss - curve.points[k].p_fa;
    if (diff == 0.0) {
      return curve.points[k].p_miss;
    }
    if (diff > 0.0) {
      if (k == 0) return curve.points[k].p_miss;  // cannot happen with valid curves
      const DetPoint& lo = curve.points[k - 1];
      const DetPoint& hi = curve.points[k];
      const double diff_lo = lo.p_miss - lo.p_fa;
      const double diff_hi = hi.p_miss - hi.p_fa;
      const double t = -diff_lo / (diff_hi - diff_lo);
      return lo.p_miss + t * (hi.p_miss - lo.p_miss);
    }
  }
  return 1.0;
}

double eer(const ScoreSet& scores) { return eer(det_curve(scores)); }

MinDcfResult min_dcf(const DetCurve& curve, const DcfParams& params) {
  if (!(params.p_target > 0.0 && params.p_target < 1.0) || params.c_miss <= 0.0 ||
      params.c_fa <= 0.0) {
    throw Error(ErrorCode::ConfigError, "DCF parameters out of range");
  }
  const double miss_weight = params.c_miss * params.p_target;
  const double fa_weight = params.c_fa * (1.0 - params.p_target);
  const double normalizer = std::min(miss_weight, fa_weight);

  MinDcfResult best;
  best.min_dcf = std::numeric_limits<double>::infinity();
  for (const auto& point : curve.points) {
    const double cost =
        (miss_weight * point.p_miss + fa_weight * point.p_fa) / normalizer;
    if (cost < best.min_dcf) {
      best.min_dcf = cost;
      best.threshold = point.threshold;
    }
  }
  return best;
}

MinDcfResult min_dcf(const ScoreSet& scores, const DcfParams& params) {
  return min_dcf(det_curve(scores), params);
}

std::pair<long, long> count_labels(const ScoreSet& scores) {
  long n_target = 0;
  long n_nontarget = 0;
  for (const auto& entry : scores.entries) {
    switch (entry.trial.label) {
      case TrialLabel::kTarget: ++n_target; break;
      case TrialLabel::kNontarget: ++n_nontarget; break;
      case TrialLabel::kUnknown:
        throw Error(ErrorCode::UnlabeledTrial,
                    "trial " + entry.trial.enroll_id + " " + entry.trial.test_id +
                        " has no label");
    }
  }
  if (n_target == 0 || n_nontarget == 0) {
    throw Error(ErrorCode::DegenerateTrialSet,
                "need at least one target and one nontarget trial");
  }
  return {n_target, n_nontarget};
}

}  // namespace svkit
