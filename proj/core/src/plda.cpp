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

#include "svkit/plda.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "svkit/preprocess.hpp"
#include "svkit/rng.hpp"

namespace svkit {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

/*
  Model: x = mu + h + e with h ~ N(0, B) per speaker and e ~ N(0, W) per
  utterance. Everything below works on centered vectors x_i = phi_i - mu.

  E-step. For a speaker with n utterances and mean xbar, the posterior of h
  is Gaussian with
      mean  m = B (B + W/n)^{-1} xbar
      cov   C = B - B (B + W/n)^{-1} B,
  the Gaussian-conditioning form of the posterior precision
  B^{-1} + n W^{-1}. It needs no inverse of B, so a between covariance that
  collapses during EM stays harmless.

  M-step.
      B <- (1/S) sum_s (C_s + m_s m_s^T)
      W <- (1/N) sum_s [ sum_i x_i x_i^T - sum_s_vec m_s^T - m_s sum_s_vec^T
                         + n_s (C_s + m_s m_s^T) ],  sum_s_vec = n_s xbar_s.
  The diagonal variant zeroes the off-diagonal of W after each update.

  Marginal likelihood. The stacked utterances of one speaker are jointly
  Gaussian with covariance I_n (x) W + 1_n 1_n^T (x) B. An orthogonal change
  of basis on the utterance axis whose first direction is 1/sqrt(n) splits
  this into (W + nB) for the scaled mean and W for the n-1 residual
  directions, giving
      log p = -1/2 [ n d log 2pi + (n-1) logdet W + logdet(W + nB)
                     + tr(W^{-1}(sum_i x_i x_i^T - n xbar xbar^T))
                     + n xbar^T (W + nB)^{-1} xbar ].
*/

struct SpeakerStats {
  Eigen::VectorXd mu;             // global mean of the raw data
  Eigen::MatrixXd means;          // S x d, per-speaker mean of centered data
  std::vector<double> counts;     // n_s
  Eigen::MatrixXd second_moment;  // sum_i x_i x_i^T over all utterances
  double n_total = 0.0;
  int dim = 0;
};

SpeakerStats build_stats(const EmbeddingArchive& archive) {
  if (archive.records.empty()) {
    throw Error(ErrorCode::InsufficientClasses, "empty archive");
  }
  std::vector<int> class_ids;
  class_ids.reserve(archive.records.size());
  std::map<std::string, int> speakers;
  for (const auto& rec : archive.records) {
    if (!rec.speaker.has_value()) {
      throw Error(ErrorCode::MissingLabel, "record '" + rec.id + "' has no speaker label");
    }
    auto [it, ignored] = speakers.emplace(*rec.speaker, static_cast<int>(speakers.size()));
    class_ids.push_back(it->second);
  }
  const int n_speakers = static_cast<int>(speakers.size());
  if (n_speakers < 2) {
    throw Error(ErrorCode::InsufficientClasses, "PLDA needs >= 2 speakers");
  }

  SpeakerStats stats;
  stats.dim = archive.dim;
  stats.n_total = static_cast<double>(archive.records.size());
  stats.mu = Eigen::VectorXd::Zero(archive.dim);
  for (const auto& rec : archive.records) stats.mu += rec.vec;
  stats.mu /= stats.n_total;

  stats.means = Eigen::MatrixXd::Zero(n_speakers, archive.dim);
  stats.counts.assign(n_speakers, 0.0);
  stats.second_moment = Eigen::MatrixXd::Zero(archive.dim, archive.dim);
  for (std::size_t i = 0; i < archive.records.size(); ++i) {
    const Eigen::VectorXd x = archive.records[i].vec - stats.mu;
    const int c = class_ids[i];
    stats.means.row(c) += x.transpose();
    stats.counts[c] += 1.0;
    stats.second_moment.noalias() += x * x.transpose();
  }
  for (int c = 0; c < n_speakers; ++c) stats.means.row(c) /= stats.counts[c];
  return stats;
}

// Speakers grouped by utterance count so per-count factorizations are reused.
std::map<long, std::vector<int>> group_by_count(const SpeakerStats& stats) {
  std::map<long, std::vector<int>> groups;
  for (std::size_t s = 0; s < stats.counts.size(); ++s) {
    groups[static_cast<long>(stats.counts[s])].push_back(static_cast<int>(s));
  }
  return groups;
}

double loglik_from_stats(const SpeakerStats& stats, const Eigen::MatrixXd& phi_b,
                         const Eigen::MatrixXd& phi_w) {
  const int d = stats.dim;
  const int n_speakers = static_cast<int>(stats.counts.size());

  Eigen::LLT<Eigen::MatrixXd> w_llt(phi_w);
  if (w_llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularCovariance, "within covariance is not positive definite");
  }
  double logdet_w = 0.0;
  for (int i = 0; i < d; ++i) logdet_w += std::log(w_llt.matrixL()(i, i));
  logdet_w *= 2.0;

  // tr(W^{-1} (second_moment - sum_s n_s xbar xbar^T))
  Eigen::MatrixXd residual_scatter = stats.second_moment;
  for (int s = 0; s < n_speakers; ++s) {
    residual_scatter.noalias() -=
        stats.counts[s] * stats.means.row(s).transpose() * stats.means.row(s);
  }
  const double trace_term = w_llt.solve(residual_scatter).trace();

  double loglik = -0.5 * (stats.n_total * d * kLog2Pi +
                          (stats.n_total - n_speakers) * logdet_w + trace_term);

  for (const auto& [count, members] : group_by_count(stats)) {
    const double n = static_cast<double>(count);
    Eigen::LLT<Eigen::MatrixXd> m_llt(phi_w + n * phi_b);
    if (m_llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularCovariance, "W + n*B is not positive definite");
    }
    double logdet_m = 0.0;
    for (int i = 0; i < d; ++i) logdet_m += std::log(m_llt.matrixL()(i, i));
    logdet_m *= 2.0;
    for (int s : members) {
      const Eigen::VectorXd xbar = stats.means.row(s).transpose();
      const double quad = n * xbar.dot(m_llt.solve(xbar));
      loglik -= 0.5 * (logdet_m + quad);
    }
  }
  return loglik;
}

void symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

// Ensures positive definiteness, first with a relative ridge, reporting what
// it had to do through `warnings`.
void ensure_pd(Eigen::MatrixXd& m, const char* name, std::vector<std::string>* warnings) {
  if (Eigen::LLT<Eigen::MatrixXd>(m).info() == Eigen::Success) return;
  const int d = static_cast<int>(m.rows());
  const double ridge = 1e-8 * std::max(m.trace(), 1e-30) / d;
  m += ridge * Eigen::MatrixXd::Identity(d, d);
  if (warnings != nullptr) {
    warnings->push_back(std::string(name) + " lost positive definiteness; applied ridge");
  }
  if (Eigen::LLT<Eigen::MatrixXd>(m).info() != Eigen::Success) {
    throw Error(ErrorCode::SingularCovariance,
                std::string(name) + " is singular even after ridge");
  }
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
    throw Error(ErrorCode::CorruptArchive, "truncated model file " + path);
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

PldaFit fit_plda(const EmbeddingArchive& archive, const EmConfig& config) {
  if (config.iterations < 1) {
    throw Error(ErrorCode::ConfigError, "iterations must be >= 1");
  }
  const SpeakerStats stats = build_stats(archive);
  const int d = stats.dim;
  const int n_speakers = static_cast<int>(stats.counts.size());

  PldaFit fit;
  fit.model.mu = stats.mu;
  fit.model.diag_constrained = config.diag_within;

  // Scatter-based init with a small relative ridge; seeded jitter only when
  // a scatter matrix is rank deficient (e.g. one utterance per speaker).
  const ScatterPair scatter = compute_scatter(archive);
  Eigen::MatrixXd phi_b =
      scatter.between +
      (1e-6 * scatter.between.trace() / d) * Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd phi_w =
      scatter.within +
      (1e-6 * scatter.within.trace() / d) * Eigen::MatrixXd::Identity(d, d);
  {
    Rng rng(config.seed);
    const double scale =
        std::max((scatter.between.trace() + scatter.within.trace()) / d, 1e-12);
    for (Eigen::MatrixXd* m : {&phi_b, &phi_w}) {
      if (Eigen::LLT<Eigen::MatrixXd>(*m).info() != Eigen::Success) {
        for (int i = 0; i < d; ++i) {
          (*m)(i, i) += scale * 1e-3 * (0.5 + rng.next_double());
        }
        fit.warnings.push_back("rank-deficient scatter init; added seeded diagonal jitter");
      }
    }
  }
  ensure_pd(phi_w, "within covariance (init)", &fit.warnings);

  const auto groups = group_by_count(stats);
  fit.loglik.reserve(config.iterations);
  for (int iter = 0; iter < config.iterations; ++iter) {
    Eigen::MatrixXd b_acc = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd w_acc = stats.second_moment;
    for (const auto& [count, members] : groups) {
      const double n = static_cast<double>(count);
      Eigen::LLT<Eigen::MatrixXd> m_llt(phi_b + phi_w / n);
      if (m_llt.info() != Eigen::Success) {
        throw Error(ErrorCode::SingularCovariance, "B + W/n is not positive definite");
      }
      // posterior_map = B (B + W/n)^{-1}, posterior covariance C shared by
      // every speaker with this utterance count.
      const Eigen::MatrixXd posterior_map = m_llt.solve(phi_b).transpose();
      Eigen::MatrixXd posterior_cov = phi_b - posterior_map * phi_b;
      symmetrize(posterior_cov);
      for (int s : members) {
        const Eigen::VectorXd xbar = stats.means.row(s).transpose();
        const Eigen::VectorXd m = posterior_map * xbar;
        const Eigen::VectorXd sum_vec = n * xbar;
        b_acc.noalias() += m * m.transpose();
        b_acc += posterior_cov;
        w_acc.noalias() -= sum_vec * m.transpose();
        w_acc.noalias() -= m * sum_vec.transpose();
        w_acc.noalias() += n * (m * m.transpose());
        w_acc += n * posterior_cov;
      }
    }
    phi_b = b_acc / static_cast<double>(n_speakers);
    phi_w = w_acc / stats.n_total;
    symmetrize(phi_b);
    symmetrize(phi_w);
    if (config.diag_within) {
      const Eigen::VectorXd diag = phi_w.diagonal();
      phi_w = diag.asDiagonal();
    }
    ensure_pd(phi_w, "within covariance", &fit.warnings);
    fit.loglik.push_back(loglik_from_stats(stats, phi_b, phi_w));
  }

  fit.model.phi_b = phi_b;
  fit.model.phi_w = phi_w;
  return fit;
}

PldaScorer::PldaScorer(const PldaModel& model) : mu_(model.mu) {
  const int d = model.dim();
  if (model.phi_b.rows() != d || model.phi_b.cols() != d ||
      model.phi_w.rows() != d || model.phi_w.cols() != d) {
    throw Error(ErrorCode::DimensionMismatch, "model matrices disagree with mu");
  }
  tot_llt_.compute(model.phi_b + model.phi_w);
  sum_llt_.compute(2.0 * model.phi_b + model.phi_w);
  diff_llt_.compute(model.phi_w);
  if (tot_llt_.info() != Eigen::Success || sum_llt_.info() != Eigen::Success ||
      diff_llt_.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularCovariance,
                "model covariances do not admit a Cholesky factorization");
  }
  auto logdet = [d](const Eigen::LLT<Eigen::MatrixXd>& llt) {
    double acc = 0.0;
    for (int i = 0; i < d; ++i) acc += std::log(llt.matrixL()(i, i));
    return 2.0 * acc;
  };
  // The 2d x 2d joint covariance [[T, B], [B, T]] (T = B + W) block
  // diagonalizes into T + B and T - B = W under the orthogonal map
  // (u, v) -> ((u+v)/sqrt2, (u-v)/sqrt2), so
  //   llr = -1/2 [ logdet(T+B) + logdet(W) - 2 logdet(T)
  //                + q_{T+B}(u+v)/2 + q_W(u-v)/2 - q_T(u) - q_T(v) ].
  // u+v, u-v and the pooled marginal term are all symmetric under swapping
  // e and t at the bit level, which makes the score exactly symmetric.
  logdet_const_ = logdet(sum_llt_) + logdet(diff_llt_) - 2.0 * logdet(tot_llt_);
}

double PldaScorer::pair_quadratics(const Eigen::VectorXd& u,
                                   const Eigen::VectorXd& v) const {
  const double q_sum = sum_llt_.matrixL().solve(u + v).squaredNorm();
  const double q_diff = diff_llt_.matrixL().solve(u - v).squaredNorm();
  return 0.5 * q_sum + 0.5 * q_diff;
}

double PldaScorer::score(const Eigen::VectorXd& enroll,
                         const Eigen::VectorXd& test) const {
  if (enroll.size() != mu_.size() || test.size() != mu_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "embedding dim != model dim");
  }
  const Eigen::VectorXd u = enroll - mu_;
  const Eigen::VectorXd v = test - mu_;
  const double q_e = tot_llt_.matrixL().solve(u).squaredNorm();
  const double q_t = tot_llt_.matrixL().solve(v).squaredNorm();
  const double quad = pair_quadratics(u, v) - (q_e + q_t);
  return -0.5 * (logdet_const_ + quad);
}

ScoreSet PldaScorer::score_trials(const EmbeddingArchive& archive,
                                  const std::vector<Trial>& trials) const {
  if (archive.dim != mu_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "archive dim != model dim");
  }
  const auto index = archive.index();
  const Eigen::Index n = static_cast<Eigen::Index>(archive.records.size());
  Eigen::MatrixXd centered(mu_.size(), n);
  Eigen::VectorXd marginal_quad(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    centered.col(i) = archive.records[static_cast<std::size_t>(i)].vec - mu_;
    marginal_quad[i] = tot_llt_.matrixL().solve(centered.col(i)).squaredNorm();
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
    const Eigen::VectorXd u = centered.col(e_it->second);
    const Eigen::VectorXd v = centered.col(t_it->second);
    const double quad =
        pair_quadratics(u, v) - (marginal_quad[e_it->second] + marginal_quad[t_it->second]);
    scores.entries.push_back({trials[t], -0.5 * (logdet_const_ + quad)});
  }
  return scores;
}

double score_llr(const PldaModel& model, const Eigen::VectorXd& enroll,
                 const Eigen::VectorXd& test) {
  return PldaScorer(model).score(enroll, test);
}

ScoreSet score_trials(const PldaModel& model, const EmbeddingArchive& archive,
                      const std::vector<Trial>& trials) {
  return PldaScorer(model).score_trials(archive, trials);
}

double marginal_loglik(const PldaModel& model, const EmbeddingArchive& archive) {
  if (archive.dim != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "archive dim != model dim");
  }
  SpeakerStats stats = build_stats(archive);
  // Recenter the stats around the model mean rather than the data mean.
  const Eigen::VectorXd shift = stats.mu - model.mu;
  for (Eigen::Index s = 0; s < stats.means.rows(); ++s) {
    const double n = stats.counts[static_cast<std::size_t>(s)];
    const Eigen::VectorXd old_mean = stats.means.row(s).transpose();
    stats.second_moment.noalias() += n * (old_mean + shift) * shift.transpose();
    stats.second_moment.noalias() += n * shift * old_mean.transpose();
    stats.means.row(s) += shift.transpose();
  }
  stats.mu = model.mu;
  return loglik_from_stats(stats, model.phi_b, model.phi_w);
}

std::vector<CovarianceDiagRow> diagnose_covariances(const Eigen::MatrixXd& between,
                                                    const Eigen::MatrixXd& within) {
  if (between.rows() != within.rows() || between.rows() != between.cols() ||
      within.rows() != within.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "covariance shapes disagree");
  }
  const int d = static_cast<int>(between.rows());
  std::vector<CovarianceDiagRow> rows(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    rows[static_cast<std::size_t>(i)] = {0, i, between(i, i), within(i, i)};
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const CovarianceDiagRow& a, const CovarianceDiagRow& b) {
                     return a.between > b.between;
                   });
  for (int i = 0; i < d; ++i) rows[static_cast<std::size_t>(i)].rank = i + 1;
  return rows;
}

std::vector<CovarianceDiagRow> diagnose_covariances(const PldaModel& model) {
  return diagnose_covariances(model.phi_b, model.phi_w);
}

std::string diagnostics_csv(const std::vector<CovarianceDiagRow>& rows) {
  std::string csv = "rank,dim_index,between,within,log10_between,log10_within\n";
  char buf[128];
  auto log10_field = [](double value, char* out, std::size_t out_size) {
    if (value <= 0.0) {
      std::snprintf(out, out_size, "-inf");
    } else {
      std::snprintf(out, out_size, "%.9g", std::log10(value));
    }
  };
  for (const auto& row : rows) {
    char lb[40], lw[40];
    log10_field(row.between, lb, sizeof(lb));
    log10_field(row.within, lw, sizeof(lw));
    std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%s,%s\n", row.rank,
                  row.dim_index, row.between, row.within, lb, lw);
    csv += buf;
  }
  return csv;
}

PldaModel read_plda(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
  char magic[5];
  is.read(magic, 5);
  if (is.gcount() != 5 || std::memcmp(magic, "PLDA1", 5) != 0) {
    throw Error(ErrorCode::UnsupportedFormat, "bad magic in " + path);
  }
  const auto d = read_le<std::uint32_t>(is, path);
  const auto flag = read_le<std::uint8_t>(is, path);
  if (d < 1) throw Error(ErrorCode::CorruptArchive, "bad dimension in " + path);

  PldaModel model;
  model.diag_constrained = (flag != 0);
  model.mu.resize(d);
  for (std::uint32_t i = 0; i < d; ++i) model.mu[i] = read_le<double>(is, path);
  auto read_matrix = [&](Eigen::MatrixXd& m) {
    m.resize(d, d);
    for (std::uint32_t r = 0; r < d; ++r) {
      for (std::uint32_t c = 0; c < d; ++c) m(r, c) = read_le<double>(is, path);
    }
  };
  read_matrix(model.phi_b);
  read_matrix(model.phi_w);
  if (!model.mu.allFinite() || !model.phi_b.allFinite() || !model.phi_w.allFinite()) {
    throw Error(ErrorCode::NonFinite, "non-finite model in " + path);
  }
  if (model.diag_constrained) {
    for (std::uint32_t r = 0; r < d; ++r) {
      for (std::uint32_t c = 0; c < d; ++c) {
        if (r != c && model.phi_w(r, c) != 0.0) {
          throw Error(ErrorCode::CorruptArchive,
                      "diag-constrained model has nonzero off-diagonal in " + path);
        }
      }
    }
  }
  return model;
}

void write_plda(const PldaModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path);
  os.write("PLDA1", 5);
  const int d = model.dim();
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  write_le<std::uint8_t>(os, model.diag_constrained ? 1 : 0);
  for (int i = 0; i < d; ++i) write_le<double>(os, model.mu[i]);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) write_le<double>(os, model.phi_b(r, c));
  }
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) write_le<double>(os, model.phi_w(r, c));
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path);
}

}  // namespace svkit
