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

#include <cmath>

#include "doctest.h"
#include "svkit/cosine.hpp"
#include "svkit/rng.hpp"

using namespace svkit;

TEST_CASE("cosine_score hand values") {
  Eigen::VectorXd v(3);
  v << 0.3, -2, 5;
  CHECK(cosine_score(v, v) == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::VectorXd e1(2), e2(2), diag(2);
  e1 << 1, 0;
  e2 << 0, 1;
  diag << 1, 1;
  CHECK(cosine_score(e1, e2) == doctest::Approx(0.0));
  CHECK(cosine_score(e1, diag) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(cosine_score(e1, diag) == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(cosine_score(e1, Eigen::VectorXd(-e1)) == doctest::Approx(-1.0));

  CHECK_THROWS_AS(cosine_score(e1, Eigen::VectorXd::Zero(2)), Error);
}

TEST_CASE("cosine_score stays in [-1, 1] and ignores positive scaling") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + static_cast<int>(rng.next_below(8));
    Eigen::VectorXd e(d), t(d);
    for (int i = 0; i < d; ++i) {
      e[i] = rng.next_gaussian();
      t[i] = rng.next_gaussian();
    }
    if (e.norm() == 0.0 || t.norm() == 0.0) continue;
    const double score = cosine_score(e, t);
    CHECK(score >= -1.0);
    CHECK(score <= 1.0);
    const double a = 0.001 + 100.0 * rng.next_double();
    const double b = 0.001 + 100.0 * rng.next_double();
    CHECK(cosine_score(a * e, b * t) == doctest::Approx(score).epsilon(1e-12));
  }
}

TEST_CASE("cosine_score_trials") {
  Rng rng(3);
  EmbeddingArchive archive;
  archive.dim = 5;
  for (int i = 0; i < 12; ++i) {
    Embedding rec;
    rec.id = "v" + std::to_string(i);
    rec.vec.resize(5);
    for (int j = 0; j < 5; ++j) rec.vec[j] = rng.next_gaussian();
    archive.records.push_back(std::move(rec));
  }

  SUBCASE("self trials score 1") {
    std::vector<Trial> trials;
    for (int i = 0; i < 12; ++i) {
      trials.push_back({"v" + std::to_string(i), "v" + std::to_string(i),
                        TrialLabel::kTarget});
    }
    for (const auto& entry : cosine_score_trials(archive, trials).entries) {
      CHECK(entry.score == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("batch equals per-pair") {
    std::vector<Trial> trials;
    for (int t = 0; t < 60; ++t) {
      trials.push_back({"v" + std::to_string(rng.next_below(12)),
                        "v" + std::to_string(rng.next_below(12)), TrialLabel::kUnknown});
    }
    const auto scores = cosine_score_trials(archive, trials);
    const auto index = archive.index();
    for (std::size_t t = 0; t < trials.size(); ++t) {
      const double direct = cosine_score(archive.records[index.at(trials[t].enroll_id)].vec,
                                         archive.records[index.at(trials[t].test_id)].vec);
      CHECK(scores.entries[t].score == doctest::Approx(direct).epsilon(1e-12));
    }
  }
  SUBCASE("empty trial list") {
    CHECK(cosine_score_trials(archive, {}).entries.empty());
  }
  SUBCASE("unknown id") {
    try {
      cosine_score_trials(archive, {{"v0", "missing", TrialLabel::kUnknown}});
      FAIL("expected UnknownId");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownId);
    }
  }
  SUBCASE("zero vector names the offending id") {
    archive.records[3].vec.setZero();
    try {
      cosine_score_trials(archive, {{"v0", "v1", TrialLabel::kUnknown}});
      FAIL("expected ZeroVector");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ZeroVector);
      CHECK(e.detail().find("v3") != std::string::npos);
    }
  }
}
