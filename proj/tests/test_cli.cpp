#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mixvae/checkpoint.hpp"
#include "mixvae/commands.hpp"
#include "mixvae/csv.hpp"
#include "mixvae/errors.hpp"

using namespace mixvae;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::current_path() / ("cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

struct RunResult {
  int exit_code;
  std::string err;
};

/// Runs the CLI binary with `args`, capturing stderr.
RunResult run_cli(const std::string& args, const std::string& env = "") {
  const fs::path err = fs::current_path() / "cli_stderr.txt";
  const std::string cmd = env + " '" + std::string(MIXVAE_CLI) + "' " + args + " > /dev/null 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

const char* kSmallConfig =
    "data.synthetic_per_class=10\n"
    "optim.batch_size=8\n"
    "optim.stage1_epochs=1\n"
    "optim.stage2_epochs=2\n";

std::size_t count_rows(const std::string& csv_text, const std::string& suffix) {
  std::size_t n = 0;
  std::istringstream in(csv_text);
  for (std::string line; std::getline(in, line);) {
    if (line.size() >= suffix.size() && line.compare(line.size() - suffix.size(), suffix.size(), suffix) == 0) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("synth then split") {
  const fs::path dir = fresh_dir("synth");
  REQUIRE(run_cli("synth --per-class 25 --out '" + (dir / "corpus").string() + "'").exit_code == 0);
  const auto rows = load_manifest(dir / "corpus");
  CHECK(rows.size() == 100);
  CHECK(histogram(rows) == ClassHistogram{25, 25, 25, 25});

  REQUIRE(run_cli("split --manifest '" + (dir / "corpus").string() + "' --seed 3 --out '" + (dir / "a").string() + "'").exit_code == 0);
  REQUIRE(run_cli("split --manifest '" + (dir / "corpus").string() + "' --seed 3 --out '" + (dir / "b").string() + "'").exit_code == 0);
  REQUIRE(run_cli("split --manifest '" + (dir / "corpus").string() + "' --seed 4 --out '" + (dir / "c").string() + "'").exit_code == 0);
  const std::string a = slurp(dir / "a" / "split.csv");
  CHECK(a.rfind("id,split\n", 0) == 0);
  CHECK(count_rows(a, ",train") == 80);
  CHECK(count_rows(a, ",val") == 20);
  CHECK(slurp(dir / "b" / "split.csv") == a);
  CHECK(slurp(dir / "c" / "split.csv") != a);

  // Per-class recount from the split file.
  const Corpus corpus = load_corpus(rows);
  const SplitIndex s = read_split_csv(dir / "a" / "split.csv", corpus);
  ClassHistogram train{};
  for (auto i : s.train_ids) ++train[corpus.samples[i].label];
  CHECK(train == ClassHistogram{20, 20, 20, 20});

  // Same seed through the environment.
  REQUIRE(run_cli("split --manifest '" + (dir / "corpus").string() + "' --out '" + (dir / "d").string() + "'", "MIXVAE_SEED=3").exit_code == 0);
  CHECK(slurp(dir / "d" / "split.csv") == a);
}

TEST_CASE("train, eval and ensemble") {
  const fs::path dir = fresh_dir("train");
  write_file(dir / "small.cfg", kSmallConfig);

  TrainOptions t;
  t.config = dir / "small.cfg";
  t.out = dir / "run1";
  const TrainResult r = cmd_train(t);
  for (const char* f : {"curves.csv", "losses.csv", "checkpoint.bin", "manifest.txt"}) CHECK(fs::exists(t.out / f));
  const std::string curves = slurp(t.out / "curves.csv");
  CHECK(std::count(curves.begin(), curves.end(), '\n') == 1 + 3);
  const std::string manifest = slurp(t.out / "manifest.txt");
  CHECK(manifest.find("optim.stage2_epochs=2\n") != std::string::npos);
  CHECK(manifest.find("seed=7\n") != std::string::npos);

  SUBCASE("reruns are byte-identical") {
    t.out = dir / "run2";
    cmd_train(t);
    CHECK(slurp(dir / "run2" / "curves.csv") == curves);
    // The stored config differs only in output.dir; the weights must match bit for bit.
    const Checkpoint a = load_checkpoint(dir / "run1" / "checkpoint.bin");
    const Checkpoint b = load_checkpoint(dir / "run2" / "checkpoint.bin");
    REQUIRE(a.parameters.size() == b.parameters.size());
    for (std::size_t i = 0; i < a.parameters.size(); ++i) {
      CHECK(std::equal(a.parameters[i].second.data().begin(), a.parameters[i].second.data().end(),
                       b.parameters[i].second.data().begin()));
    }
    CHECK(a.epoch == b.epoch);
    CHECK(a.rng_state == b.rng_state);
  }

  SUBCASE("eval reproduces the best validation accuracy") {
    EvalOptions e;
    e.checkpoint = dir / "run1" / "checkpoint.bin";
    e.out = dir / "eval1";
    const EvalReport rep = cmd_eval(e);
    CHECK(rep.accuracy == r.best_val_accuracy);
    CHECK(rep.count == 8);
    const auto rows = read_probs_csv(dir / "eval1" / "probs.csv");
    REQUIRE(rows.size() == 8);
    for (const auto& row : rows) {
      CHECK(std::abs(row.p[0] + row.p[1] + row.p[2] + row.p[3] - 1.0) <= 1e-6);
    }

    // Ensembles of one or several copies reproduce the member's report.
    EnsembleOptions one;
    one.probs = {dir / "eval1" / "probs.csv"};
    one.out = dir / "ens1";
    cmd_ensemble(one);
    CHECK(slurp(dir / "ens1" / "report.json") == slurp(dir / "eval1" / "report.json"));
    CHECK(slurp(dir / "ens1" / "probs.csv") == slurp(dir / "eval1" / "probs.csv"));
    EnsembleOptions four = one;
    four.probs.assign(4, dir / "eval1" / "probs.csv");
    four.out = dir / "ens4";
    cmd_ensemble(four);
    CHECK(slurp(dir / "ens4" / "report.json") == slurp(dir / "eval1" / "report.json"));

    // Through the binary as well.
    const std::string p = (dir / "eval1" / "probs.csv").string();
    REQUIRE(run_cli("ensemble --probs '" + p + "' '" + p + "' --out '" + (dir / "ens_cli").string() + "'").exit_code == 0);
    CHECK(slurp(dir / "ens_cli" / "report.json") == slurp(dir / "eval1" / "report.json"));

    // A member whose rows are in a different order is rejected.
    std::vector<ProbRow> swapped = rows;
    std::swap(swapped[0], swapped[1]);
    write_file(dir / "swapped.csv", probs_csv(swapped));
    EnsembleOptions bad = one;
    bad.probs.push_back(dir / "swapped.csv");
    bad.out = dir / "ens_bad";
    try {
      cmd_ensemble(bad);
      FAIL("expected DataError");
    } catch (const DataError& err) {
      CHECK(std::string(err.what()).find("misaligned sample ids") != std::string::npos);
    }
    const RunResult cli_bad = run_cli("ensemble --probs '" + p + "' '" + (dir / "swapped.csv").string() + "' --out '" +
                                      (dir / "ens_bad").string() + "'");
    CHECK(cli_bad.exit_code == 3);
    CHECK(cli_bad.err.find("misaligned") != std::string::npos);
  }

  SUBCASE("seed override from the environment") {
    const RunResult res = run_cli("train --config '" + (dir / "small.cfg").string() + "' --out '" + (dir / "env").string() + "'",
                                  "MIXVAE_SEED=11");
    REQUIRE(res.exit_code == 0);
    CHECK(slurp(dir / "env" / "manifest.txt").find("seed=11\n") != std::string::npos);
    CHECK(slurp(dir / "env" / "curves.csv") != curves);
    CHECK(run_cli("split --out '" + (dir / "x").string() + "'", "MIXVAE_SEED=abc").exit_code == 2);
  }
}

TEST_CASE("probs csv round trip is exact") {
  std::vector<ProbRow> rows(2);
  rows[0] = {"a", {0.1, 0.2, 0.3, 0.4}, 3};
  rows[1] = {"b", {1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0}, 0};
  const fs::path dir = fresh_dir("probs");
  write_file(dir / "p.csv", probs_csv(rows));
  const auto back = read_probs_csv(dir / "p.csv");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].id == rows[i].id);
    CHECK(back[i].p == rows[i].p);
    CHECK(back[i].truth == rows[i].truth);
  }
  write_file(dir / "bad.csv", "id,p0,p1,p2,p3,truth\na,0.1,x,0.3,0.4,1\n");
  CHECK_THROWS_AS(read_probs_csv(dir / "bad.csv"), DataError);
}

TEST_CASE("failures exit nonzero with a message") {
  const fs::path dir = fresh_dir("fail");
  write_file(dir / "typo.cfg", "optim.learnig_rate=0.1\n");
  const RunResult typo = run_cli("train --config '" + (dir / "typo.cfg").string() + "' --out '" + (dir / "o").string() + "'");
  CHECK(typo.exit_code == 2);
  CHECK(typo.err.find("optim.learnig_rate") != std::string::npos);

  const RunResult missing = run_cli("eval --checkpoint '" + (dir / "none.bin").string() + "' --out '" + (dir / "o").string() + "'");
  CHECK(missing.exit_code == 3);
  CHECK(missing.err.find("none.bin") != std::string::npos);

  write_file(dir / "explode.cfg", std::string(kSmallConfig) + "optim.lr=1e200\n");
  const RunResult nan = run_cli("train --config '" + (dir / "explode.cfg").string() + "' --out '" + (dir / "o").string() + "'");
  CHECK(nan.exit_code == 4);
  CHECK(nan.err.find("non-finite") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "o" / "checkpoint.bin"));

  CHECK(run_cli("frobnicate").exit_code != 0);
}
