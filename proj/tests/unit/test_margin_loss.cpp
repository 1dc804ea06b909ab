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
#include "oracles.hpp"
#include "svkit/margin_loss.hpp"
#include "svkit/rng.hpp"

using namespace svkit;

namespace {

Batch random_batch(Rng& rng, int n, int d, int classes) {
  Batch batch;
  batch.inputs.resize(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) batch.inputs(i, j) = rng.next_gaussian();
    batch.labels.push_back(static_cast<int>(rng.next_below(classes)));
  }
  return batch;
}

ClassifierHead random_head(Rng& rng, int d, int classes) {
  ClassifierHead head;
  head.weights.resize(d, classes);
  head.biases.resize(classes);
  for (int j = 0; j < classes; ++j) {
    for (int i = 0; i < d; ++i) head.weights(i, j) = rng.next_gaussian();
    head.biases[j] = 0.5 * rng.next_gaussian();
  }
  return head;
}

// Three 2-D gaussian blobs inside a 70-degree wedge. The shared radial
// direction gives a linear encoder a useful axis to compress: shrinking it
// widens the angular gaps the margin asks for and tightens the clusters.
Batch three_blobs(Rng& rng, int per_class, double radius, double sigma) {
  Batch batch;
  batch.inputs.resize(3 * per_class, 2);
  const double angles_deg[3] = {-35.0, 0.0, 35.0};
  for (int c = 0; c < 3; ++c) {
    const double angle = angles_deg[c] * 3.14159265358979323846 / 180.0;
    for (int i = 0; i < per_class; ++i) {
      const int row = c * per_class + i;
      batch.inputs(row, 0) = radius * std::cos(angle) + sigma * rng.next_gaussian();
      batch.inputs(row, 1) = radius * std::sin(angle) + sigma * rng.next_gaussian();
      batch.labels.push_back(c);
    }
  }
  return batch;
}

}  // namespace

TEST_CASE("psi margin function") {
  SUBCASE("identity margins") {
    const MarginConfig identity{1.0, 1.0, 0.0, 0.0};
    CHECK(psi(0.5, identity) == 0.5);  // exact
    CHECK(psi(-1.0, identity) == -1.0);
    CHECK(psi(1.0, identity) == 1.0);
  }
  SUBCASE("additive cosine margin") {
    MarginConfig am;
    am.m3 = 0.35;
    CHECK(psi(0.5, am) == doctest::Approx(0.15).epsilon(1e-12));
  }
  SUBCASE("additive angular margin at theta = 0") {
    MarginConfig aam;
    aam.m2 = 0.2;
    CHECK(psi(1.0, aam) == doctest::Approx(std::cos(0.2)).epsilon(1e-12));
    CHECK(psi(1.0, aam) == doctest::Approx(0.98007).epsilon(1e-5));
  }
  SUBCASE("A-Softmax m1=2 is the double-angle identity") {
    MarginConfig a_softmax;
    a_softmax.m1 = 2.0;
    for (double c = -1.0; c <= 1.0; c += 0.05) {
      CHECK(psi(c, a_softmax) == doctest::Approx(2.0 * c * c - 1.0).epsilon(1e-12));
    }
  }
  SUBCASE("domain") {
    MarginConfig cfg;
    CHECK(psi(1.0 + 5e-10, cfg) == doctest::Approx(1.0));  // clamped
    CHECK_THROWS_AS(psi(1.1, cfg), Error);
    CHECK_THROWS_AS(psi(-1.1, cfg), Error);
  }
}

TEST_CASE("degenerate margin equals plain softmax under normalization") {
  Rng rng(12);
  const int d = 6, classes = 5, n = 10;
  Batch batch = random_batch(rng, n, d, classes);
  ClassifierHead head = random_head(rng, d, classes);

  // Pre-normalize and zero the bias so Eq-1-style logits match the modified
  // softmax exactly.
  for (int i = 0; i < n; ++i) batch.inputs.row(i).normalize();
  for (int j = 0; j < classes; ++j) head.weights.col(j).normalize();
  head.biases.setZero();

  MarginConfig cfg;
  cfg.s = 1.0;
  cfg.m1 = 1.0;
  cfg.m2 = 0.0;
  cfg.m3 = 0.0;
  const auto margin = margin_ce_loss(batch, head, cfg);
  const auto softmax = softmax_ce_loss(batch, head);
  CHECK(std::abs(margin.loss - softmax.loss) < 1e-12);
}

TEST_CASE("margins never decrease the loss") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 2 + static_cast<int>(rng.next_below(6));
    const int classes = 2 + static_cast<int>(rng.next_below(5));
    const int n = 1 + static_cast<int>(rng.next_below(12));
    const Batch batch = random_batch(rng, n, d, classes);
    const ClassifierHead head = random_head(rng, d, classes);

    MarginConfig plain;
    plain.s = 10.0;
    const double base = margin_ce_loss(batch, head, plain).loss;

    MarginConfig am = plain;
    am.m3 = 0.2;
    CHECK(margin_ce_loss(batch, head, am).loss >= base - 1e-12);

    // The additive angular margin only penalizes while theta + m2 <= pi.
    MarginConfig aam = plain;
    aam.m2 = 0.2;
    bool unsaturated = true;
    for (int i = 0; i < n; ++i) {
      const double cos_target =
          batch.inputs.row(i).normalized().dot(
              head.weights.col(batch.labels[static_cast<std::size_t>(i)]).normalized());
      if (std::acos(std::clamp(cos_target, -1.0, 1.0)) + aam.m2 > 3.14159265) {
        unsaturated = false;
      }
    }
    if (unsaturated) {
      CHECK(margin_ce_loss(batch, head, aam).loss >= base - 1e-12);
    }
  }
}

TEST_CASE("margin loss ignores positive rescaling of inputs and weights") {
  Rng rng(31);
  const Batch batch = random_batch(rng, 8, 4, 3);
  const ClassifierHead head = random_head(rng, 4, 3);
  MarginConfig cfg;
  cfg.s = 8.0;
  cfg.m2 = 0.1;
  const double base = margin_ce_loss(batch, head, cfg).loss;

  Batch scaled_batch = batch;
  scaled_batch.inputs.row(2) *= 37.0;
  ClassifierHead scaled_head = head;
  scaled_head.weights.col(1) *= 0.004;
  CHECK(std::abs(margin_ce_loss(scaled_batch, scaled_head, cfg).loss - base) < 1e-10);
}

TEST_CASE("softmax_ce_loss hand values") {
  SUBCASE("uniform posterior gives log C") {
    Batch batch;
    batch.inputs = Eigen::MatrixXd::Zero(3, 2);
    batch.labels = {0, 1, 0};
    ClassifierHead head;
    head.weights = Eigen::MatrixXd::Ones(2, 2);  // equal logits
    head.biases = Eigen::VectorXd::Zero(2);
    CHECK(softmax_ce_loss(batch, head).loss ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("saturated correct logits drive the loss to zero") {
    Batch batch;
    batch.inputs = Eigen::MatrixXd::Identity(2, 2);
    batch.labels = {0, 1};
    ClassifierHead head;
    head.weights = 20.0 * Eigen::MatrixXd::Identity(2, 2);
    head.biases = Eigen::VectorXd::Zero(2);
    CHECK(softmax_ce_loss(batch, head).loss < 1e-3);
  }
}

TEST_CASE("loss error paths") {
  Rng rng(1);
  Batch batch = random_batch(rng, 4, 3, 2);
  ClassifierHead head = random_head(rng, 3, 2);

  SUBCASE("empty batch") {
    Batch empty;
    empty.inputs.resize(0, 3);
    CHECK_THROWS_AS(margin_ce_loss(empty, head, {}), Error);
  }
  SUBCASE("zero input vector") {
    batch.inputs.row(1).setZero();
    try {
      margin_ce_loss(batch, head, {});
      FAIL("expected ZeroVector");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ZeroVector);
    }
  }
  SUBCASE("zero weight column") {
    head.weights.col(0).setZero();
    CHECK_THROWS_AS(margin_ce_loss(batch, head, {}), Error);
  }
  SUBCASE("label out of range") {
    batch.labels[0] = 7;
    CHECK_THROWS_AS(margin_ce_loss(batch, head, {}), Error);
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(2718);
  const int d = 5, classes = 4, n = 8;

  std::vector<MarginConfig> configs;
  {
    MarginConfig plain;  // modified softmax
    plain.s = 6.0;
    configs.push_back(plain);
    MarginConfig a = plain;
    a.m1 = 2.0;  // A-Softmax
    configs.push_back(a);
    MarginConfig aam = plain;
    aam.m2 = 0.2;  // AAM-Softmax
    configs.push_back(aam);
    MarginConfig am = plain;
    am.m3 = 0.25;  // AM-Softmax
    configs.push_back(am);
    MarginConfig all = plain;
    all.m1 = 1.5;
    all.m2 = 0.1;
    all.m3 = 0.1;
    configs.push_back(all);
  }

  for (const auto& cfg : configs) {
    const Batch batch = random_batch(rng, n, d, classes);
    const ClassifierHead head = random_head(rng, d, classes);
    const auto result = margin_ce_loss(batch, head, cfg);

    const double input_err = testing::max_gradient_error(
        batch.inputs, result.d_inputs, [&](const Eigen::MatrixXd& inputs) {
          Batch probe = batch;
          probe.inputs = inputs;
          return margin_ce_loss(probe, head, cfg).loss;
        });
    CHECK(input_err < 1e-5);

    const double weight_err = testing::max_gradient_error(
        head.weights, result.d_weights, [&](const Eigen::MatrixXd& weights) {
          ClassifierHead probe = head;
          probe.weights = weights;
          return margin_ce_loss(batch, probe, cfg).loss;
        });
    CHECK(weight_err < 1e-5);
  }

  // Plain softmax: inputs, weights and biases.
  const Batch batch = random_batch(rng, n, d, classes);
  const ClassifierHead head = random_head(rng, d, classes);
  const auto result = softmax_ce_loss(batch, head);
  CHECK(testing::max_gradient_error(batch.inputs, result.d_inputs,
                                    [&](const Eigen::MatrixXd& inputs) {
                                      Batch probe = batch;
                                      probe.inputs = inputs;
                                      return softmax_ce_loss(probe, head).loss;
                                    }) < 1e-5);
  CHECK(testing::max_gradient_error(head.weights, result.d_weights,
                                    [&](const Eigen::MatrixXd& weights) {
                                      ClassifierHead probe = head;
                                      probe.weights = weights;
                                      return softmax_ce_loss(batch, probe).loss;
                                    }) < 1e-5);
  CHECK(testing::max_gradient_error(head.biases, result.d_biases,
                                    [&](const Eigen::MatrixXd& biases) {
                                      ClassifierHead probe = head;
                                      probe.biases = biases.col(0);
                                      return softmax_ce_loss(batch, probe).loss;
                                    }) < 1e-5);
}

TEST_CASE("toy_train basics") {
  Rng rng(5);
  SUBCASE("one class rejected") {
    Batch batch = random_batch(rng, 6, 2, 3);
    for (auto& label : batch.labels) label = 1;
    CHECK_THROWS_AS(toy_train(batch, {}), Error);
  }
  SUBCASE("zero learning rate freezes the ratio history") {
    const Batch batch = three_blobs(rng, 20, 3.0, 0.5);
    ToyTrainConfig cfg;
    cfg.epochs = 10;
    cfg.lr = 0.0;
    cfg.seed = 4;
    const auto result = toy_train(batch, cfg);
    REQUIRE(result.trace_ratio_history.size() == 10);
    for (const double ratio : result.trace_ratio_history) {
      CHECK(ratio == result.trace_ratio_history.front());
    }
  }
}

TEST_CASE("angular margin tightens classes at toy scale") {
  Rng rng(20260805);
  const Batch batch = three_blobs(rng, 60, 3.0, 0.4);

  ToyTrainConfig plain;
  plain.loss = LossKind::kMargin;
  plain.margin.s = 30.0;
  plain.margin.m2 = 0.0;
  plain.epochs = 200;
  plain.lr = 0.02;
  plain.seed = 13;

  ToyTrainConfig margined = plain;
  margined.margin.m2 = 0.2;

  const auto base = toy_train(batch, plain);
  const auto tight = toy_train(batch, margined);
  CHECK(tight.trace_ratio_history.back() < base.trace_ratio_history.back());
}
