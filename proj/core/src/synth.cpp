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

#include "svkit/synth.hpp"

#include <cmath>
#include <cstdio>

#include "svkit/rng.hpp"

namespace svkit {

namespace {

// Symmetric square-root factor of a PSD matrix; eigenvalues slightly below
// zero (fp noise) are floored, anything worse is rejected.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov, const char* name) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularCovariance,
                std::string(name) + ": eigendecomposition failed");
  }
  const double floor = -1e-10 * std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 1.0);
  Eigen::VectorXd roots(eig.eigenvalues().size());
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    const double lambda = eig.eigenvalues()[i];
    if (lambda < floor) {
      throw Error(ErrorCode::SingularCovariance,
                  std::string(name) + " is not positive semidefinite");
    }
    roots[i] = std::sqrt(std::max(lambda, 0.0));
  }
  return eig.eigenvectors() * roots.asDiagonal();
}

Eigen::VectorXd log_ramp(int d, double hi, double lo) {
  Eigen::VectorXd values(d);
  const double step = (d > 1) ? (std::log(lo) - std::log(hi)) / (d - 1) : 0.0;
  for (int i = 0; i < d; ++i) values[i] = std::exp(std::log(hi) + step * i);
  return values;
}

// Seeded random orthogonal matrix: QR of a gaussian matrix with the sign
// convention diag(R) > 0.
Eigen::MatrixXd random_orthogonal(int d, Rng& rng) {
  Eigen::MatrixXd gauss(d, d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) gauss(r, c) = rng.next_gaussian();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace

EmbeddingArchive sample_dataset(const SynthSpec& spec) {
  if (spec.dim < 1 || spec.n_speakers < 1 || spec.utts_per_speaker < 1) {
    throw Error(ErrorCode::ConfigError, "synth spec needs dim/speakers/utts >= 1");
  }
  if (spec.phi_b.rows() != spec.dim || spec.phi_w.rows() != spec.dim ||
      spec.mu.size() != spec.dim) {
    throw Error(ErrorCode::DimensionMismatch, "synth spec shapes disagree with dim");
  }
  const Eigen::MatrixXd between_factor = psd_factor(spec.phi_b, "phi_b");
  const Eigen::MatrixXd within_factor = psd_factor(spec.phi_w, "phi_w");

  Rng rng(spec.seed);
  EmbeddingArchive archive;
  archive.dim = spec.dim;
  archive.records.reserve(static_cast<std::size_t>(spec.n_speakers) *
                          static_cast<std::size_t>(spec.utts_per_speaker));
  Eigen::VectorXd z(spec.dim);
  char buf[64];
  for (int s = 0; s < spec.n_speakers; ++s) {
    std::snprintf(buf, sizeof(buf), "spk%05d", s);
    const std::string speaker = buf;
    for (int i = 0; i < spec.dim; ++i) z[i] = rng.next_gaussian();
    const Eigen::VectorXd offset = between_factor * z;
    for (int u = 0; u < spec.utts_per_speaker; ++u) {
      for (int i = 0; i < spec.dim; ++i) z[i] = rng.next_gaussian();
      Embedding rec;
      std::snprintf(buf, sizeof(buf), "%s-u%03d", speaker.c_str(), u);
      rec.id = buf;
      rec.speaker = speaker;
      rec.vec = spec.mu + offset + within_factor * z;
      archive.records.push_back(std::move(rec));
    }
  }
  return archive;
}

SynthSpec preset(const std::string& name, int d, std::uint64_t seed) {
  if (d < 4) {
    throw Error(ErrorCode::ConfigError, "presets need d >= 4");
  }
  SynthSpec spec;
  spec.dim = d;
  spec.seed = seed;
  spec.mu = Eigen::VectorXd::Zero(d);
  if (name == "large-margin") {
    // Between spread evenly (gentle ramp) and above within in every
    // dimension; within smaller in trace on a steeper ramp.
    spec.phi_b = log_ramp(d, 0.5, 0.3).asDiagonal();
    spec.phi_w = log_ramp(d, 0.4, 0.12).asDiagonal();
  } else if (name == "conventional") {
    // Between concentrates in a few coordinate dimensions; within is larger
    // in trace and rotated against the between basis, which puts strong
    // off-diagonal structure into the coordinate frame. Rotating only the
    // within matrix matters: a rotation shared by both would be a pure
    // change of basis that neither cosine nor full PLDA could even see.
    // The rotation stream is distinct from the sampling one so archives
    // with the same seed stay reproducible.
    Rng rng(seed ^ 0xc0117a7e5eedULL);
    const Eigen::MatrixXd rotation = random_orthogonal(d, rng);
    const Eigen::MatrixXd within_diag = log_ramp(d, 6.0, 0.5).asDiagonal();
    spec.phi_b = log_ramp(d, 8.0, 0.05).asDiagonal();
    spec.phi_w = rotation * within_diag * rotation.transpose();
    spec.phi_w = 0.5 * (spec.phi_w + spec.phi_w.transpose()).eval();
  } else {
    throw Error(ErrorCode::UnknownPreset, "unknown preset '" + name + "'");
  }
  return spec;
}

std::vector<Trial> sample_trials(const EmbeddingArchive& archive, int n_target,
                                 int n_nontarget, std::uint64_t seed) {
  if (n_target < 0 || n_nontarget < 0) {
    throw Error(ErrorCode::ConfigError, "trial counts must be >= 0");
  }
  // Bucket record indices by speaker, order of first appearance.
  std::vector<std::vector<int>> by_speaker;
  {
    std::unordered_map<std::string, int> speaker_index;
    for (std::size_t i = 0; i < archive.records.size(); ++i) {
      const auto& rec = archive.records[i];
      if (!rec.speaker.has_value()) {
        throw Error(ErrorCode::MissingLabel, "record '" + rec.id + "' has no speaker label");
      }
      auto [it, inserted] =
          speaker_index.emplace(*rec.speaker, static_cast<int>(by_speaker.size()));
      if (inserted) by_speaker.emplace_back();
      by_speaker[static_cast<std::size_t>(it->second)].push_back(static_cast<int>(i));
    }
  }
  std::vector<int> multi_utt;  // speakers usable for target pairs
  for (std::size_t s = 0; s < by_speaker.size(); ++s) {
    if (by_speaker[s].size() >= 2) multi_utt.push_back(static_cast<int>(s));
  }
  if (n_target > 0 && multi_utt.empty()) {
    throw Error(ErrorCode::DegenerateTrialSet, "no speaker has >= 2 utterances");
  }
  if (n_nontarget > 0 && by_speaker.size() < 2) {
    throw Error(ErrorCode::DegenerateTrialSet, "nontarget trials need >= 2 speakers");
  }

  Rng rng(seed);
  std::vector<Trial> trials;
  trials.reserve(static_cast<std::size_t>(n_target) + static_cast<std::size_t>(n_nontarget));
  for (int t = 0; t < n_target; ++t) {
    const auto& utts = by_speaker[static_cast<std::size_t>(
        multi_utt[rng.next_below(multi_utt.size())])];
    const std::uint64_t a = rng.next_below(utts.size());
    std::uint64_t b = rng.next_below(utts.size() - 1);
    if (b >= a) ++b;
    trials.push_back({archive.records[static_cast<std::size_t>(utts[a])].id,
                      archive.records[static_cast<std::size_t>(utts[b])].id,
                      TrialLabel::kTarget});
  }
  for (int t = 0; t < n_nontarget; ++t) {
    const std::uint64_t sa = rng.next_below(by_speaker.size());
    std::uint64_t sb = rng.next_below(by_speaker.size() - 1);
    if (sb >= sa) ++sb;
    const auto& utts_a = by_speaker[static_cast<std::size_t>(sa)];
    const auto& utts_b = by_speaker[static_cast<std::size_t>(sb)];
    trials.push_back(
        {archive.records[static_cast<std::size_t>(utts_a[rng.next_below(utts_a.size())])].id,
         archive.records[static_cast<std::size_t>(utts_b[rng.next_below(utts_b.size())])].id,
         TrialLabel::kNontarget});
  }
  return trials;
}

}  // namespace svkit
