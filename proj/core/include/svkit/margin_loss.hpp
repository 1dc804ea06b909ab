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

#ifndef SVKIT_MARGIN_LOSS_HPP_
#define SVKIT_MARGIN_LOSS_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "svkit/error.hpp"

namespace svkit {

// Margin family psi(theta) = cos(m1 theta + m2) - m3 applied to the target
// logit, with logits rescaled by s. (1, 0, 0) reduces to the modified
// (normalized) softmax; m1 alone is the multiplicative angular margin, m2
// the additive angular margin, m3 the additive cosine margin.
struct MarginConfig {
  double s = 30.0;
  double m1 = 1.0;
  double m2 = 0.0;
  double m3 = 0.0;
};

struct ClassifierHead {
  Eigen::MatrixXd weights;  // d x C, column j is class j
  Eigen::VectorXd biases;   // C, used only by the plain softmax loss

  int classes() const { return static_cast<int>(weights.cols()); }
};

struct Batch {
  Eigen::MatrixXd inputs;   // N x d
  std::vector<int> labels;  // values in [0, C)
};

// psi evaluated at a cosine; values outside [-1,1] by more than 1e-9 are
// rejected, within that they are clamped.
double psi(double cos_theta, const MarginConfig& config);

// d psi / d cos_theta with the cosine clamped into [-1+1e-7, 1-1e-7] so the
// arccos derivative stays bounded.
double psi_grad(double cos_theta, const MarginConfig& config);

struct MarginLossResult {
  double loss = 0.0;
  Eigen::MatrixXd d_inputs;   // N x d, w.r.t. raw inputs
  Eigen::MatrixXd d_weights;  // d x C, w.r.t. raw weight columns
};

// Mean cross entropy over the batch with weight columns and inputs unit
// normalized, psi applied to the target logit only, everything scaled by s.
// Gradients are analytic through the normalizations and arccos.
MarginLossResult margin_ce_loss(const Batch& batch, const ClassifierHead& head,
                                const MarginConfig& config);

struct SoftmaxLossResult {
  double loss = 0.0;
  Eigen::MatrixXd d_inputs;
  Eigen::MatrixXd d_weights;
  Eigen::VectorXd d_biases;
};

// Plain softmax cross entropy over logits W^T x + b.
SoftmaxLossResult softmax_ce_loss(const Batch& batch, const ClassifierHead& head);

enum class LossKind { kSoftmax, kMargin };

struct ToyTrainConfig {
  LossKind loss = LossKind::kMargin;
  MarginConfig margin;  // used when loss == kMargin
  int epochs = 200;
  double lr = 0.05;
  std::uint64_t seed = 0;
  int encoder_dim = 0;  // 0 keeps the input dimension
};

struct ToyTrainResult {
  Eigen::MatrixXd encoder;  // encoder_dim x d linear map
  ClassifierHead head;
  std::vector<double> loss_history;         // per epoch
  std::vector<double> trace_ratio_history;  // tr(S_W)/tr(S_B) per epoch
};

// Full-batch gradient descent on a linear encoder plus classifier head,
// recording the within/between scatter-trace ratio of the encoded points
// after each epoch. Deterministic for a fixed seed.
ToyTrainResult toy_train(const Batch& dataset, const ToyTrainConfig& config);

}  // namespace svkit

#endif  // SVKIT_MARGIN_LOSS_HPP_
