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
//
// Pipeline front door. Stages communicate only through files:
//   synth -> preprocess -> train-plda -> score -> evaluate / diagnose
// stdout carries data (when --out is omitted), stderr carries logs, and
// failures exit with "ERROR <Code>: <detail>" on stderr using the exit
// classes 1 (usage), 2 (format), 3 (numeric).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "svkit/cosine.hpp"
#include "svkit/margin_loss.hpp"
#include "svkit/metrics.hpp"
#include "svkit/plda.hpp"
#include "svkit/preprocess.hpp"
#include "svkit/rng.hpp"
#include "svkit/synth.hpp"

namespace {

using namespace svkit;

void write_text_output(const std::string& content, const std::string& path) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path);
  os << content;
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path);
}

void write_archive_as(const EmbeddingArchive& archive, const std::string& path,
                      const std::string& format) {
  if (format == "text") {
    write_archive_text(archive, path);
  } else {
    write_archive_binary(archive, path);
  }
}

Eigen::VectorXd parse_diag(const std::string& csv, int expected_dim,
                           const char* what) {
  std::vector<double> values;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    try {
      values.push_back(std::stod(token));
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError,
                  std::string(what) + ": bad number '" + token + "'");
    }
  }
  if (static_cast<int>(values.size()) != expected_dim) {
    throw Error(ErrorCode::ConfigError,
                std::string(what) + ": expected " + std::to_string(expected_dim) +
                    " comma-separated values, got " + std::to_string(values.size()));
  }
  Eigen::VectorXd diag(expected_dim);
  for (int i = 0; i < expected_dim; ++i) diag[i] = values[i];
  return diag;
}

// --- synth -------------------------------------------------------------------

struct SynthArgs {
  std::string preset_name;
  int dim = 16;
  int speakers = 200;
  int utts = 10;
  std::uint64_t seed = 0;
  std::string phi_b_diag, phi_w_diag;
  double phi_b_iso = 0.0, phi_w_iso = 0.0;
  std::string out;
  std::string format = "binary";
  std::string trials_out;
  int n_target = 0;
  int n_nontarget = 0;
  std::uint64_t trial_seed = 1;
};

void run_synth(const SynthArgs& args) {
  SynthSpec spec;
  if (!args.preset_name.empty()) {
    spec = preset(args.preset_name, args.dim, args.seed);
  } else {
    spec.dim = args.dim;
    spec.seed = args.seed;
    spec.mu = Eigen::VectorXd::Zero(args.dim);
    if (!args.phi_b_diag.empty()) {
      spec.phi_b = parse_diag(args.phi_b_diag, args.dim, "--phi-b-diag").asDiagonal();
    } else {
      spec.phi_b = args.phi_b_iso * Eigen::MatrixXd::Identity(args.dim, args.dim);
    }
    if (!args.phi_w_diag.empty()) {
      spec.phi_w = parse_diag(args.phi_w_diag, args.dim, "--phi-w-diag").asDiagonal();
    } else {
      spec.phi_w = args.phi_w_iso * Eigen::MatrixXd::Identity(args.dim, args.dim);
    }
  }
  spec.n_speakers = args.speakers;
  spec.utts_per_speaker = args.utts;

  const EmbeddingArchive archive = sample_dataset(spec);
  write_archive_as(archive, args.out, args.format);
  std::cerr << "synth: wrote " << archive.records.size() << " embeddings (dim "
            << archive.dim << ") to " << args.out << "\n";

  if (!args.trials_out.empty()) {
    const auto trials =
        sample_trials(archive, args.n_target, args.n_nontarget, args.trial_seed);
    write_trials(trials, args.trials_out);
    std::cerr << "synth: wrote " << trials.size() << " trials to " << args.trials_out
              << "\n";
  }
}

// --- preprocess ---------------------------------------------------------------

struct PreprocessArgs {
  std::string in, out;
  bool do_center = false;
  bool do_ln = false;
  int lda = 0;
  int lda_diag = 0;
  std::string projection_out;
  std::string projection_in;
  std::string format = "binary";
};

void run_preprocess(const PreprocessArgs& args) {
  if (args.lda > 0 && args.lda_diag > 0) {
    throw Error(ErrorCode::UsageError, "--lda and --lda-diag are exclusive");
  }
  if (!args.projection_in.empty() && (args.lda > 0 || args.lda_diag > 0)) {
    throw Error(ErrorCode::UsageError,
                "--apply-projection cannot be combined with LDA fitting");
  }
  EmbeddingArchive archive = read_archive(args.in);
  // Stage order is fixed and documented: center, then length normalization,
  // then projection. Run the subcommand twice for any other order.
  if (args.do_center) {
    archive = center(archive).first;
  }
  if (args.do_ln) {
    archive = length_normalize(archive);
  }
  if (args.lda > 0 || args.lda_diag > 0) {
    const int k = args.lda > 0 ? args.lda : args.lda_diag;
    const Projection projection = fit_lda(archive, k, args.lda_diag > 0);
    if (!args.projection_out.empty()) {
      write_projection(projection, args.projection_out);
      std::cerr << "preprocess: wrote projection to " << args.projection_out << "\n";
    }
    archive = apply_projection(projection, archive);
  } else if (!args.projection_in.empty()) {
    archive = apply_projection(read_projection(args.projection_in), archive);
  }
  write_archive_as(archive, args.out, args.format);
  std::cerr << "preprocess: wrote " << archive.records.size() << " embeddings (dim "
            << archive.dim << ") to " << args.out << "\n";
}

// --- train-plda ----------------------------------------------------------------

struct TrainArgs {
  std::string in, out;
  bool diag = false;
  int iters = 20;
  std::uint64_t seed = 0;
  std::string loglik_out;
};

void run_train_plda(const TrainArgs& args) {
  const EmbeddingArchive archive = read_archive(args.in);
  EmConfig config;
  config.iterations = args.iters;
  config.diag_within = args.diag;
  config.seed = args.seed;
  const PldaFit fit = fit_plda(archive, config);
  for (const auto& warning : fit.warnings) {
    std::cerr << "train-plda: warning: " << warning << "\n";
  }
  write_plda(fit.model, args.out);

  std::string log = "iteration,loglik\n";
  char buf[64];
  for (std::size_t i = 0; i < fit.loglik.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9f\n", i + 1, fit.loglik[i]);
    log += buf;
  }
  if (!args.loglik_out.empty()) {
    write_text_output(log, args.loglik_out);
  }
  const double last = fit.loglik.back();
  const double delta = fit.loglik.size() > 1
                           ? last - fit.loglik[fit.loglik.size() - 2]
                           : 0.0;
  std::cerr << "train-plda: " << fit.loglik.size() << " iterations, final loglik "
            << last << " (last delta " << delta << "), model " << args.out << "\n";
}

// --- score ----------------------------------------------------------------------

struct ScoreArgs {
  std::string backend;
  std::string in, trials, out, model;
};

void run_score(const ScoreArgs& args) {
  if (args.backend == "plda" && args.model.empty()) {
    throw Error(ErrorCode::UsageError, "--backend plda requires --model");
  }
  const EmbeddingArchive archive = read_archive(args.in);
  const std::vector<Trial> trials = read_trials(args.trials);
  ScoreSet scores;
  if (args.backend == "cosine") {
    scores = cosine_score_trials(archive, trials);
  } else if (args.backend == "plda") {
    const PldaModel model = read_plda(args.model);
    scores = score_trials(model, archive, trials);
  } else {
    throw Error(ErrorCode::UsageError, "--backend must be cosine or plda");
  }
  write_scores(scores, args.out);
  std::cerr << "score: wrote " << scores.entries.size() << " scores to " << args.out
            << "\n";
}

// --- evaluate -------------------------------------------------------------------

struct EvaluateArgs {
  std::string scores;
  std::string out;
  std::string det_out;
  DcfParams dcf;
};

void run_evaluate(const EvaluateArgs& args) {
  const ScoreSet scores = read_scores(args.scores);
  const DetCurve curve = det_curve(scores);
  const double eer_value = eer(curve);
  const MinDcfResult dcf = min_dcf(curve, args.dcf);
  const auto [n_target, n_nontarget] = count_labels(scores);

  char buf[160];
  std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.9g,%ld,%ld\n", eer_value, dcf.min_dcf,
                dcf.threshold, n_target, n_nontarget);
  write_text_output(buf, args.out);

  if (!args.det_out.empty()) {
    std::string det = "threshold,p_miss,p_fa\n";
    for (const auto& point : curve.points) {
      std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", point.threshold,
                    point.p_miss, point.p_fa);
      det += buf;
    }
    write_text_output(det, args.det_out);
  }
  std::cerr << "evaluate: eer " << eer_value << ", minDCF " << dcf.min_dcf << " ("
            << n_target << " target / " << n_nontarget << " nontarget trials)\n";
}

// --- diagnose -------------------------------------------------------------------

struct DiagnoseArgs {
  std::string model;
  std::string archive;
  std::string out;
};

void run_diagnose(const DiagnoseArgs& args) {
  if (args.model.empty() == args.archive.empty()) {
    throw Error(ErrorCode::UsageError, "need exactly one of --model or --archive");
  }
  std::vector<CovarianceDiagRow> rows;
  if (!args.model.empty()) {
    rows = diagnose_covariances(read_plda(args.model));
  } else {
    const ScatterPair scatter = compute_scatter(read_archive(args.archive));
    rows = diagnose_covariances(scatter.between, scatter.within);
  }
  write_text_output(diagnostics_csv(rows), args.out);
  std::cerr << "diagnose: " << rows.size() << " dimensions\n";
}

// --- toy-train ------------------------------------------------------------------

struct ToyArgs {
  std::string loss = "aam";
  double s = 30.0;
  double m1 = -1.0;  // negative means "loss-family default"
  double m2 = -1.0;
  double m3 = -1.0;
  int epochs = 200;
  double lr = 0.02;
  std::uint64_t seed = 0;
  std::string in;  // labeled archive; generated blobs when empty
  int classes = 3;
  int per_class = 60;
  double radius = 3.0;
  double sigma = 0.4;
  double wedge_deg = 70.0;
  int encoder_dim = 0;
  std::string out;
};

Batch generated_blobs(const ToyArgs& args) {
  if (args.classes < 2) {
    throw Error(ErrorCode::InsufficientClasses, "--classes must be >= 2");
  }
  Rng rng(args.seed);
  Batch batch;
  batch.inputs.resize(static_cast<Eigen::Index>(args.classes) * args.per_class, 2);
  for (int c = 0; c < args.classes; ++c) {
    const double frac = args.classes > 1 ? static_cast<double>(c) / (args.classes - 1) : 0.5;
    const double angle = (frac - 0.5) * args.wedge_deg * 3.14159265358979323846 / 180.0;
    for (int i = 0; i < args.per_class; ++i) {
      const Eigen::Index row = static_cast<Eigen::Index>(c) * args.per_class + i;
      batch.inputs(row, 0) = args.radius * std::cos(angle) + args.sigma * rng.next_gaussian();
      batch.inputs(row, 1) = args.radius * std::sin(angle) + args.sigma * rng.next_gaussian();
      batch.labels.push_back(c);
    }
  }
  return batch;
}

Batch batch_from_archive(const EmbeddingArchive& archive) {
  Batch batch;
  batch.inputs = archive.matrix();
  std::map<std::string, int> classes;
  for (const auto& rec : archive.records) {
    if (!rec.speaker.has_value()) {
      throw Error(ErrorCode::MissingLabel, "record '" + rec.id + "' has no speaker label");
    }
    auto [it, ignored] = classes.emplace(*rec.speaker, static_cast<int>(classes.size()));
    batch.labels.push_back(it->second);
  }
  return batch;
}

void run_toy_train(const ToyArgs& args) {
  ToyTrainConfig config;
  config.epochs = args.epochs;
  config.lr = args.lr;
  config.seed = args.seed;
  config.encoder_dim = args.encoder_dim;
  config.margin.s = args.s;
  if (args.loss == "softmax") {
    config.loss = LossKind::kSoftmax;
  } else if (args.loss == "msoftmax") {
    config.loss = LossKind::kMargin;
  } else if (args.loss == "a") {
    config.loss = LossKind::kMargin;
    config.margin.m1 = 2.0;
  } else if (args.loss == "aam") {
    config.loss = LossKind::kMargin;
    config.margin.m2 = 0.2;
  } else if (args.loss == "am") {
    config.loss = LossKind::kMargin;
    config.margin.m3 = 0.2;
  } else {
    throw Error(ErrorCode::UsageError,
                "--loss must be one of softmax|msoftmax|a|aam|am");
  }
  if (args.m1 >= 0.0) config.margin.m1 = args.m1;
  if (args.m2 >= 0.0) config.margin.m2 = args.m2;
  if (args.m3 >= 0.0) config.margin.m3 = args.m3;

  const Batch dataset =
      args.in.empty() ? generated_blobs(args) : batch_from_archive(read_archive(args.in));
  const ToyTrainResult result = toy_train(dataset, config);

  std::string csv = "epoch,loss,trace_ratio\n";
  char buf[96];
  for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g\n", e + 1, result.loss_history[e],
                  result.trace_ratio_history[e]);
    csv += buf;
  }
  write_text_output(csv, args.out);
  std::cerr << "toy-train: " << result.loss_history.size() << " epochs, final ratio "
            << (result.trace_ratio_history.empty() ? 0.0
                                                   : result.trace_ratio_history.back())
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speaker-verification back-end toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Plain-text 'key = value' config file; command-line flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);  // unknown keys rejected

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Sample a labeled embedding archive");
  synth_cmd->add_option("--preset", synth_args.preset_name,
                        "Covariance preset: conventional|large-margin");
  synth_cmd->add_option("--d", synth_args.dim, "Embedding dimension")->capture_default_str();
  synth_cmd->add_option("--speakers", synth_args.speakers, "Number of speakers")
      ->capture_default_str();
  synth_cmd->add_option("--utts", synth_args.utts, "Utterances per speaker")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth_args.seed, "Sampling seed")->capture_default_str();
  synth_cmd->add_option("--phi-b-diag", synth_args.phi_b_diag,
                        "Between covariance diagonal, comma separated");
  synth_cmd->add_option("--phi-w-diag", synth_args.phi_w_diag,
                        "Within covariance diagonal, comma separated");
  synth_cmd->add_option("--phi-b-iso", synth_args.phi_b_iso,
                        "Isotropic between covariance (used without --preset/--phi-b-diag)");
  synth_cmd->add_option("--phi-w-iso", synth_args.phi_w_iso,
                        "Isotropic within covariance (used without --preset/--phi-w-diag)");
  synth_cmd->add_option("--out", synth_args.out, "Output archive path")->required();
  synth_cmd->add_option("--format", synth_args.format, "Archive format: binary|text")
      ->check(CLI::IsMember({"binary", "text"}))
      ->capture_default_str();
  synth_cmd->add_option("--trials-out", synth_args.trials_out,
                        "Also sample a trial list to this path");
  synth_cmd->add_option("--n-target", synth_args.n_target, "Target trials for --trials-out");
  synth_cmd->add_option("--n-nontarget", synth_args.n_nontarget,
                        "Nontarget trials for --trials-out");
  synth_cmd->add_option("--trial-seed", synth_args.trial_seed, "Trial sampling seed")
      ->capture_default_str();

  PreprocessArgs pre_args;
  auto* pre_cmd = app.add_subcommand(
      "preprocess", "Center / length-normalize / project an archive (in that order)");
  pre_cmd->add_option("--in", pre_args.in, "Input archive")->required();
  pre_cmd->add_option("--out", pre_args.out, "Output archive")->required();
  pre_cmd->add_flag("--center", pre_args.do_center, "Subtract the archive mean");
  pre_cmd->add_flag("--ln", pre_args.do_ln, "Length-normalize to norm sqrt(d)");
  pre_cmd->add_option("--lda", pre_args.lda, "Fit and apply LDA to this dimension");
  pre_cmd->add_option("--lda-diag", pre_args.lda_diag,
                      "Fit and apply LDA with diagonalized within scatter");
  pre_cmd->add_option("--projection", pre_args.projection_out,
                      "Write the fitted projection here (with --lda/--lda-diag)");
  pre_cmd->add_option("--apply-projection", pre_args.projection_in,
                      "Apply a previously fitted projection file");
  pre_cmd->add_option("--format", pre_args.format, "Output format: binary|text")
      ->check(CLI::IsMember({"binary", "text"}))
      ->capture_default_str();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train-plda", "EM-train a two-covariance PLDA model");
  train_cmd->add_option("--in", train_args.in, "Labeled training archive")->required();
  train_cmd->add_option("--out", train_args.out, "Output model path")->required();
  train_cmd->add_flag("--diag", train_args.diag,
                      "Constrain the within covariance to a diagonal each iteration");
  train_cmd->add_option("--iters", train_args.iters, "EM iterations")->capture_default_str();
  train_cmd->add_option("--seed", train_args.seed, "Init jitter seed (rank-deficient scatter)")
      ->capture_default_str();
  train_cmd->add_option("--loglik", train_args.loglik_out,
                        "Write the per-iteration log-likelihood CSV here");

  ScoreArgs score_args;
  auto* score_cmd = app.add_subcommand("score", "Score a trial list against an archive");
  score_cmd->add_option("--backend", score_args.backend, "cosine|plda")->required();
  score_cmd->add_option("--in", score_args.in, "Embedding archive")->required();
  score_cmd->add_option("--trials", score_args.trials, "Trial list")->required();
  score_cmd->add_option("--out", score_args.out, "Output score file")->required();
  score_cmd->add_option("--model", score_args.model, "PLDA model (required for plda)");

  EvaluateArgs eval_args;
  auto* eval_cmd =
      app.add_subcommand("evaluate", "EER / minDCF of a labeled score file");
  eval_cmd->add_option("--scores", eval_args.scores, "Score file")->required();
  eval_cmd->add_option("--out", eval_args.out,
                       "Metrics CSV row 'eer,min_dcf,dcf_threshold,n_target,n_nontarget'"
                       " (stdout when omitted)");
  eval_cmd->add_option("--det", eval_args.det_out, "Also dump the DET curve CSV here");
  eval_cmd->add_option("--p-target", eval_args.dcf.p_target, "DCF target prior")
      ->capture_default_str();
  eval_cmd->add_option("--c-miss", eval_args.dcf.c_miss, "DCF miss cost")
      ->capture_default_str();
  eval_cmd->add_option("--c-fa", eval_args.dcf.c_fa, "DCF false-alarm cost")
      ->capture_default_str();

  DiagnoseArgs diag_args;
  auto* diag_cmd = app.add_subcommand(
      "diagnose", "Per-dimension between/within covariance table, sorted by between");
  diag_cmd->add_option("--model", diag_args.model, "PLDA model file");
  diag_cmd->add_option("--archive", diag_args.archive, "Labeled archive (empirical scatter)");
  diag_cmd->add_option("--out", diag_args.out, "Output CSV (stdout when omitted)");

  ToyArgs toy_args;
  auto* toy_cmd = app.add_subcommand(
      "toy-train", "Train a linear encoder + classifier head on toy data");
  toy_cmd->add_option("--loss", toy_args.loss, "softmax|msoftmax|a|aam|am")
      ->capture_default_str();
  toy_cmd->add_option("--s", toy_args.s, "Logit scale")->capture_default_str();
  toy_cmd->add_option("--m1", toy_args.m1, "Multiplicative angular margin override");
  toy_cmd->add_option("--m2", toy_args.m2, "Additive angular margin override (radians)");
  toy_cmd->add_option("--m3", toy_args.m3, "Additive cosine margin override");
  toy_cmd->add_option("--epochs", toy_args.epochs, "Training epochs")->capture_default_str();
  toy_cmd->add_option("--lr", toy_args.lr, "Learning rate")->capture_default_str();
  toy_cmd->add_option("--seed", toy_args.seed, "Dataset seed")->capture_default_str();
  toy_cmd->add_option("--in", toy_args.in, "Labeled archive to train on (default: blobs)");
  toy_cmd->add_option("--classes", toy_args.classes, "Generated classes")
      ->capture_default_str();
  toy_cmd->add_option("--per-class", toy_args.per_class, "Points per generated class")
      ->capture_default_str();
  toy_cmd->add_option("--radius", toy_args.radius, "Generated blob radius")
      ->capture_default_str();
  toy_cmd->add_option("--sigma", toy_args.sigma, "Generated blob stddev")
      ->capture_default_str();
  toy_cmd->add_option("--wedge-deg", toy_args.wedge_deg, "Generated class wedge (degrees)")
      ->capture_default_str();
  toy_cmd->add_option("--encoder-dim", toy_args.encoder_dim,
                      "Encoder output dimension (0 keeps the input dim)");
  toy_cmd->add_option("--out", toy_args.out,
                      "History CSV 'epoch,loss,trace_ratio' (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // help goes to stdout, exit 0
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR Usage: " << e.what() << "\n";
    return 1;
  }

  try {
    if (synth_cmd->parsed()) run_synth(synth_args);
    if (pre_cmd->parsed()) run_preprocess(pre_args);
    if (train_cmd->parsed()) run_train_plda(train_args);
    if (score_cmd->parsed()) run_score(score_args);
    if (eval_cmd->parsed()) run_evaluate(eval_args);
    if (diag_cmd->parsed()) run_diagnose(diag_args);
    if (toy_cmd->parsed()) run_toy_train(toy_args);
  } catch (const Error& e) {
    std::cerr << "ERROR " << to_string(e.code()) << ": " << e.detail() << "\n";
    return exit_class(e.code());
  } catch (const std::exception& e) {
    std::cerr << "ERROR Internal: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
