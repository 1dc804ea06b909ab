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
// Drives the svkit binary (path in $SVKIT_CLI) through the documented
// pipeline and failure modes.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
  std::string stderr_text;
};

const std::string& cli_path() {
  static const std::string path = [] {
    const char* env = std::getenv("SVKIT_CLI");
    REQUIRE_MESSAGE(env != nullptr, "SVKIT_CLI must point at the svkit binary");
    return std::string(env);
  }();
  return path;
}

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "svkit_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args) {
  const fs::path out = work_dir() / "stdout.txt";
  const fs::path err = work_dir() / "stderr.txt";
  const std::string command =
      cli_path() + " " + args + " >" + out.string() + " 2>" + err.string();
  const int raw = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  result.stdout_text = slurp(out);
  result.stderr_text = slurp(err);
  return result;
}

}  // namespace

TEST_CASE("help exists for every subcommand and lists its flags") {
  const RunResult top = run_cli("--help");
  CHECK(top.exit_code == 0);
  for (const char* name :
       {"synth", "preprocess", "train-plda", "score", "evaluate", "diagnose",
        "toy-train"}) {
    CHECK(top.stdout_text.find(name) != std::string::npos);
    const RunResult sub = run_cli(std::string(name) + " --help");
    CHECK(sub.exit_code == 0);
    CHECK(sub.stdout_text.find("--help") != std::string::npos);
  }
  // Spot-check that flags are listed.
  CHECK(run_cli("score --help").stdout_text.find("--backend") != std::string::npos);
  CHECK(run_cli("evaluate --help").stdout_text.find("--p-target") != std::string::npos);
  CHECK(run_cli("synth --help").stdout_text.find("--preset") != std::string::npos);
}

TEST_CASE("full pipeline runs end to end and is byte-stable") {
  const fs::path dir = work_dir();
  const std::string train = (dir / "train.emb").string();
  const std::string eval_archive = (dir / "eval.emb").string();
  const std::string trials = (dir / "trials.txt").string();

  CHECK(run_cli("synth --preset large-margin --d 8 --speakers 40 --utts 6 --seed 7 --out " +
                train)
            .exit_code == 0);
  CHECK(run_cli("synth --preset large-margin --d 8 --speakers 30 --utts 5 --seed 8 --out " +
                eval_archive + " --trials-out " + trials +
                " --n-target 150 --n-nontarget 250 --trial-seed 3")
            .exit_code == 0);

  const std::string train_ln = (dir / "train_ln.emb").string();
  const std::string eval_ln = (dir / "eval_ln.emb").string();
  CHECK(run_cli("preprocess --ln --in " + train + " --out " + train_ln).exit_code == 0);
  CHECK(run_cli("preprocess --ln --in " + eval_archive + " --out " + eval_ln).exit_code == 0);

  const std::string model = (dir / "model.plda").string();
  const std::string loglik = (dir / "model.loglik.csv").string();
  CHECK(run_cli("train-plda --diag --iters 8 --in " + train_ln + " --out " + model +
                " --loglik " + loglik)
            .exit_code == 0);
  CHECK(slurp(loglik).find("iteration,loglik") == 0);

  const std::string scores = (dir / "scores.txt").string();
  CHECK(run_cli("score --backend plda --model " + model + " --in " + eval_ln +
                " --trials " + trials + " --out " + scores)
            .exit_code == 0);

  const RunResult metrics = run_cli("evaluate --scores " + scores);
  CHECK(metrics.exit_code == 0);
  // Single CSV row: eer,min_dcf,dcf_threshold,n_target,n_nontarget
  CHECK(metrics.stdout_text.find("150,250") != std::string::npos);

  SUBCASE("re-running a stage reproduces outputs byte for byte") {
    const std::string scores2 = (dir / "scores2.txt").string();
    CHECK(run_cli("score --backend plda --model " + model + " --in " + eval_ln +
                  " --trials " + trials + " --out " + scores2)
              .exit_code == 0);
    CHECK(slurp(scores) == slurp(scores2));

    const std::string train2 = (dir / "train2.emb").string();
    CHECK(run_cli("synth --preset large-margin --d 8 --speakers 40 --utts 6 --seed 7 --out " +
                  train2)
              .exit_code == 0);
    CHECK(slurp(train) == slurp(train2));
  }

  SUBCASE("cosine backend needs no model") {
    const std::string cos_scores = (dir / "cos_scores.txt").string();
    CHECK(run_cli("score --backend cosine --in " + eval_ln + " --trials " + trials +
                  " --out " + cos_scores)
              .exit_code == 0);
    CHECK(run_cli("evaluate --scores " + cos_scores).exit_code == 0);
  }

  SUBCASE("diagnose from model and from archive") {
    const RunResult from_model = run_cli("diagnose --model " + model);
    CHECK(from_model.exit_code == 0);
    CHECK(from_model.stdout_text.find("rank,dim_index,between,within") == 0);
    const RunResult from_archive = run_cli("diagnose --archive " + train_ln);
    CHECK(from_archive.exit_code == 0);
  }

  SUBCASE("lda stage writes a reusable projection") {
    const std::string projected = (dir / "train_lda.emb").string();
    const std::string projection = (dir / "lda.prj").string();
    CHECK(run_cli("preprocess --ln --lda 4 --projection " + projection + " --in " + train +
                  " --out " + projected)
              .exit_code == 0);
    const std::string applied = (dir / "eval_lda.emb").string();
    CHECK(run_cli("preprocess --ln --apply-projection " + projection + " --in " +
                  eval_archive + " --out " + applied)
              .exit_code == 0);
  }
}

TEST_CASE("usage errors exit 1") {
  const RunResult no_model = run_cli("score --backend plda --in x.emb --trials t.txt --out s.txt");
  CHECK(no_model.exit_code == 1);
  CHECK(no_model.stderr_text.find("ERROR") != std::string::npos);

  CHECK(run_cli("nonsense-subcommand").exit_code == 1);
  CHECK(run_cli("synth").exit_code == 1);  // missing required --out

  const RunResult bad_preset =
      run_cli("synth --preset mystery --d 8 --out " + (work_dir() / "x.emb").string());
  CHECK(bad_preset.exit_code == 1);
  CHECK(bad_preset.stderr_text.find("UnknownPreset") != std::string::npos);
}

TEST_CASE("format errors exit 2") {
  const fs::path dir = work_dir();
  const fs::path junk = dir / "junk.emb";
  std::ofstream(junk) << "not an archive";
  const RunResult bad_archive =
      run_cli("preprocess --ln --in " + junk.string() + " --out " + (dir / "o.emb").string());
  CHECK(bad_archive.exit_code == 2);
  CHECK(bad_archive.stderr_text.find("ERROR UnsupportedFormat") != std::string::npos);

  // Unlabeled score file cannot be evaluated.
  const fs::path unlabeled = dir / "unlabeled_scores.txt";
  std::ofstream(unlabeled) << "a b 0.5\nc d 0.25\n";
  const RunResult eval = run_cli("evaluate --scores " + unlabeled.string());
  CHECK(eval.exit_code == 2);
  CHECK(eval.stderr_text.find("UnlabeledTrial") != std::string::npos);

  const RunResult missing = run_cli("evaluate --scores " + (dir / "absent.txt").string());
  CHECK(missing.exit_code == 2);
}

TEST_CASE("numeric errors exit 3") {
  const fs::path dir = work_dir();
  // An archive with a zero vector cannot be length-normalized.
  const fs::path zero = dir / "zero.txt";
  std::ofstream(zero) << "EMBT 2 unlabeled\na 0 0\nb 1 2\n";
  const RunResult ln =
      run_cli("preprocess --ln --in " + zero.string() + " --out " + (dir / "z.emb").string());
  CHECK(ln.exit_code == 3);
  CHECK(ln.stderr_text.find("ZeroVector") != std::string::npos);

  // Single-speaker PLDA training.
  const fs::path single = dir / "single.txt";
  std::ofstream(single) << "EMBT 2 labeled\na s1 1 2\nb s1 2 1\n";
  const RunResult train = run_cli("train-plda --in " + single.string() + " --out " +
                                  (dir / "m.plda").string());
  CHECK(train.exit_code == 3);
  CHECK(train.stderr_text.find("InsufficientClasses") != std::string::npos);
}

TEST_CASE("toy-train emits a history CSV") {
  const RunResult result =
      run_cli("toy-train --loss aam --epochs 5 --lr 0.02 --seed 3 --per-class 10");
  CHECK(result.exit_code == 0);
  CHECK(result.stdout_text.find("epoch,loss,trace_ratio") == 0);
  // header + 5 epochs
  int lines = 0;
  for (const char c : result.stdout_text) {
    if (c == '\n') ++lines;
  }
  CHECK(lines == 6);
}

TEST_CASE("config file provides defaults, flags override") {
  const fs::path dir = work_dir();
  const fs::path cfg = dir / "svkit.cfg";
  {
    std::ofstream os(cfg);
    os << "[synth]\n";
    os << "preset = large-margin\n";
    os << "d = 8\n";
    os << "speakers = 5\n";
    os << "utts = 2\n";
    os << "seed = 11\n";
  }
  const std::string out_a = (dir / "cfg_a.emb").string();
  const std::string out_b = (dir / "cfg_b.emb").string();
  CHECK(run_cli("--config " + cfg.string() + " synth --out " + out_a).exit_code == 0);
  CHECK(run_cli("synth --preset large-margin --d 8 --speakers 5 --utts 2 --seed 11 --out " +
                out_b)
            .exit_code == 0);
  CHECK(slurp(out_a) == slurp(out_b));

  // Flag overrides the config value: different speaker count changes bytes.
  const std::string out_c = (dir / "cfg_c.emb").string();
  CHECK(run_cli("--config " + cfg.string() + " synth --speakers 6 --out " + out_c)
            .exit_code == 0);
  CHECK(slurp(out_a) != slurp(out_c));

  // Unknown keys are rejected.
  const fs::path bad = dir / "bad.cfg";
  std::ofstream(bad) << "[synth]\nno_such_key = 1\n";
  CHECK(run_cli("--config " + bad.string() + " synth --preset large-margin --d 8 --out " +
                (dir / "cfg_d.emb").string())
            .exit_code == 1);
}
