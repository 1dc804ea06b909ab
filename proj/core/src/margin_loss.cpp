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

#include "svkit/margin_loss.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "svkit/preprocess.hpp"
#include "svkit/rng.hpp"

namespace svkit {

namespace {

constexpr double kCosSlack = 1e-9;   // tolerated overshoot of |cos| past 1
constexpr double kGradClamp = 1e-7;  // keeps d(arccos)/dc bounded

void validate_batch(const Batch& batch, const ClassifierHead& head) {
  if (batch.inputs.rows() == 0) {
    throw Error(ErrorCode::EmptyBatch, "batch has no rows");
  }
  if (static_cast<std::size_t>(batch.inputs.rows()) != batch.labels.size()) {
    throw Error(ErrorCode::DimensionMismatch, "inputs and labels disagree");
  }
  if (batch.inputs.cols() != head.weights.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "input dim != weight dim");
  }
  const int classes = head.classes();
  if (classes < 2) {
    throw Error(ErrorCode::InsufficientClasses, "head needs >= 2 classes");
  }
  for (const int label : batch.labels) {
    if (label < 0 || label >= classes) {
      throw Error(ErrorCode::BadLabel, "label " + std::to_string(label) + " out of range");
    }
  }
}

// Row-wise softmax cross entropy; returns the loss and fills p with the
// softmax probabilities.
double ce_from_logits(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                      Eigen::MatrixXd& p) {
  const Eigen::Index n = logits.rows();
  p.resizeLike(logits);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z_max = logits.row(i).maxCoeff();
    const Eigen::ArrayXd shifted = logits.row(i).transpose().array() - z_max;
    const Eigen::ArrayXd exps = shifted.exp();
    const double denom = exps.sum();
    p.row(i) = (exps / denom).transpose();
    loss += std::log(denom) - shifted[labels[static_cast<std::size_t>(i)]];
  }
  return loss / static_cast<double>(n);
}

}  // namespace

double psi(double cos_theta, const MarginConfig& config) {
  if (cos_theta < -1.0 - kCosSlack || cos_theta > 1.0 + kCosSlack) {
    throw Error(ErrorCode::DomainError,
                "cos_theta " + std::to_string(cos_theta) + " outside [-1, 1]");
  }
  const double c = std::clamp(cos_theta, -1.0, 1.0);
  if (config.m1 == 1.0) {
    // cos(theta + m2) expanded for stability; exact identity when m2 = 0.
    const double sin_theta = std::sqrt(1.0 - c * c);
    return c * std::cos(config.m2) - sin_theta * std::sin(config.m2) - config.m3;
  }
  return std::cos(config.m1 * std::acos(c) + config.m2) - config.m3;
}

double psi_grad(double cos_theta, const MarginConfig& config) {
  const double c = std::clamp(cos_theta, -1.0 + kGradClamp, 1.0 - kGradClamp);
  const double sin_theta = std::sqrt(1.0 - c * c);
  if (config.m1 == 1.0) {
    return std::cos(config.m2) + c * std::sin(config.m2) / sin_theta;
  }
  return config.m1 * std::sin(config.m1 * std::acos(c) + config.m2) / sin_theta;
}

MarginLossResult margin_ce_loss(const Batch& batch, const ClassifierHead& head,
                                const MarginConfig& config) {
  validate_batch(batch, head);
  const Eigen::Index n = batch.inputs.rows();
  const Eigen::Index d = batch.inputs.cols();
  const Eigen::Index classes = head.weights.cols();

  Eigen::VectorXd input_norms(n);
  Eigen::MatrixXd unit_inputs(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = batch.inputs.row(i).norm();
    if (norm == 0.0) {
      throw Error(ErrorCode::ZeroVector, "zero input at row " + std::to_string(i));
    }
    input_norms[i] = norm;
    unit_inputs.row(i) = batch.inputs.row(i) / norm;
  }
  Eigen::VectorXd weight_norms(classes);
  Eigen::MatrixXd unit_weights(d, classes);
  for (Eigen::Index j = 0; j < classes; ++j) {
    const double norm = head.weights.col(j).norm();
    if (norm == 0.0) {
      throw Error(ErrorCode::ZeroVector, "zero weight column " + std::to_string(j));
    }
    weight_norms[j] = norm;
    unit_weights.col(j) = head.weights.col(j) / norm;
  }

  Eigen::MatrixXd cosines = unit_inputs * unit_weights;  // N x C
  cosines = cosines.cwiseMax(-1.0).cwiseMin(1.0);

  Eigen::MatrixXd logits = config.s * cosines;
  Eigen::VectorXd target_psi_grad(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = batch.labels[static_cast<std::size_t>(i)];
    logits(i, y) = config.s * psi(cosines(i, y), config);
    target_psi_grad[i] = psi_grad(cosines(i, y), config);
  }

  MarginLossResult result;
  Eigen::MatrixXd p;
  result.loss = ce_from_logits(logits, batch.labels, p);

  // dL/dcos: (p - onehot) * s / N, times psi' on the target entry; then back
  // through the unit normalizations, dc/dx = (w_hat - c x_hat)/||x|| and
  // symmetrically for w.
  Eigen::MatrixXd g = p;
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, batch.labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  g *= config.s / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, batch.labels[static_cast<std::size_t>(i)]) *= target_psi_grad[i];
  }

  const Eigen::VectorXd row_gc = (g.array() * cosines.array()).rowwise().sum();
  result.d_inputs =
      ((g * unit_weights.transpose() - row_gc.asDiagonal() * unit_inputs).array().colwise() /
       input_norms.array())
          .matrix();
  const Eigen::VectorXd col_gc = (g.array() * cosines.array()).colwise().sum();
  result.d_weights =
      ((unit_inputs.transpose() * g - unit_weights * col_gc.asDiagonal()).array().rowwise() /
       weight_norms.transpose().array())
          .matrix();
  return result;
}

SoftmaxLossResult softmax_ce_loss(const Batch& batch, const ClassifierHead& head) {
  validate_batch(batch, head);
  if (head.biases.size() != head.weights.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "biases size != classes");
  }
  const Eigen::Index n = batch.inputs.rows();

  Eigen::MatrixXd logits = batch.inputs * head.weights;
  logits.rowwise() += head.biases.transpose();

  SoftmaxLossResult result;
  Eigen::MatrixXd p;
  result.loss = ce_from_logits(logits, batch.labels, p);

  Eigen::MatrixXd g = p;
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, batch.labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  g /= static_cast<double>(n);
  result.d_inputs = g * head.weights.transpose();
  result.d_weights = batch.inputs.transpose() * g;
  result.d_biases = g.colwise().sum().transpose();
  return result;
}

ToyTrainResult toy_train(const Batch& dataset, const ToyTrainConfig& config) {
  if (config.lr < 0.0) {
    throw Error(ErrorCode::ConfigError, "learning rate must be >= 0");
  }
  if (config.epochs < 0) {
    throw Error(ErrorCode::ConfigError, "epochs must be >= 0");
  }
  if (dataset.inputs.rows() == 0) {
    throw Error(ErrorCode::EmptyBatch, "empty dataset");
  }
  // Compact labels to dense class ids so scatter bookkeeping stays simple.
  std::map<int, int> remap;
  for (const int label : dataset.labels) {
    remap.emplace(label, static_cast<int>(remap.size()));
  }
  if (remap.size() < 2) {
    throw Error(ErrorCode::InsufficientClasses, "toy_train needs >= 2 classes");
  }
  std::vector<int> labels;
  labels.reserve(dataset.labels.size());
  for (const int label : dataset.labels) labels.push_back(remap.at(label));
  const int classes = static_cast<int>(remap.size());
  const Eigen::Index d_in = dataset.inputs.cols();
  const Eigen::Index d_emb = (config.encoder_dim > 0) ? config.encoder_dim : d_in;

  // Deterministic prototype init: identity encoder, weight columns at the
  // unit class-mean directions. Keeps the two training arms of an A/B
  // comparison on the same footing; config.seed only steers dataset
  // generation upstream.
  Eigen::MatrixXd encoder = Eigen::MatrixXd::Identity(d_emb, d_in);
  ClassifierHead head;
  head.weights.resize(d_emb, classes);
  head.biases = Eigen::VectorXd::Zero(classes);
  {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(d_emb, classes);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(classes);
    for (Eigen::Index i = 0; i < dataset.inputs.rows(); ++i) {
      sums.col(labels[static_cast<std::size_t>(i)]) +=
          encoder * dataset.inputs.row(i).transpose();
      counts[labels[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (int c = 0; c < classes; ++c) {
      Eigen::VectorXd mean = sums.col(c) / counts[c];
      if (mean.norm() == 0.0) {
        mean.setZero();
        mean[c % d_emb] = 1.0;  // degenerate class at the origin
      }
      head.weights.col(c) = mean.normalized();
    }
  }

  ToyTrainResult result;
  result.loss_history.reserve(static_cast<std::size_t>(config.epochs));
  result.trace_ratio_history.reserve(static_cast<std::size_t>(config.epochs));

  Batch encoded;
  encoded.labels = labels;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    encoded.inputs = dataset.inputs * encoder.transpose();

    double loss = 0.0;
    Eigen::MatrixXd d_embeddings;
    if (config.loss == LossKind::kMargin) {
      MarginLossResult step = margin_ce_loss(encoded, head, config.margin);
      loss = step.loss;
      d_embeddings = std::move(step.d_inputs);
      head.weights -= config.lr * step.d_weights;
    } else {
      SoftmaxLossResult step = softmax_ce_loss(encoded, head);
      loss = step.loss;
      d_embeddings = std::move(step.d_inputs);
      head.weights -= config.lr * step.d_weights;
      head.biases -= config.lr * step.d_biases;
    }
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::TrainingDiverged,
                  "loss became non-finite at epoch " + std::to_string(epoch));
    }
    encoder -= config.lr * (d_embeddings.transpose() * dataset.inputs);

    encoded.inputs = dataset.inputs * encoder.transpose();
    const ScatterPair scatter = compute_scatter(encoded.inputs, encoded.labels);
    result.loss_history.push_back(loss);
    result.trace_ratio_history.push_back(scatter.within.trace() / scatter.between.trace());
  }

  result.encoder = std::move(encoder);
  result.head = std::move(head);
  return result;
}

}  // namespace svkit
