#include <doctest.h>

#include <fstream>
#include <sstream>

#include "mgnet/cli.hpp"
#include "mgnet/volume_io.hpp"
#include "temp_dir.hpp"

using namespace mgnet;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mgnet3d");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const std::vector<std::string> kSmallModel = {
    "--set", "num_grids=2", "--set", "feature_channels=4", "--set", "data_channels=4",
    "--set", "smoothing_iters=1"};

std::vector<std::string> with_model(std::vector<std::string> args) {
  args.insert(args.end(), kSmallModel.begin(), kSmallModel.end());
  return args;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("params reports the default count and both deltas") {
    const Outcome o = run_cli({"params"});
    CHECK(o.code == cli::kExitOk);
    CHECK(o.out.find("param_count=7966338\n") != std::string::npos);
    CHECK(o.out.find("delta_vs_6202754=+1763584\n") != std::string::npos);
    CHECK(o.out.find("delta_vs_8288290=-321952\n") != std::string::npos);
    CHECK(o.out.find("level5=884736") != std::string::npos);

    const Outcome unshared = run_cli({"params", "--set", "share_smoothers=false"});
    CHECK(unshared.out.find("param_count=10178178\n") != std::string::npos);
    CHECK(unshared.out.find("below_8288290=false\n") != std::string::npos);
  }

  TEST_CASE("argument and configuration errors exit with 2") {
    CHECK(run_cli({}).code == cli::kExitArgument);
    CHECK(run_cli({"frobnicate"}).code == cli::kExitArgument);
    CHECK(run_cli({"params", "--bogus"}).code == cli::kExitArgument);
    CHECK(run_cli({"params", "--set", "no_such_key=1"}).code == cli::kExitArgument);
    CHECK(run_cli({"params", "--set", "num_grids=abc"}).code == cli::kExitArgument);
    CHECK(run_cli({"params", "--set", "feature_channels=8"}).code == cli::kExitArgument);
    CHECK(run_cli({"train"}).code == cli::kExitArgument);
    CHECK(run_cli({"params", "--config", "/nonexistent.cfg"}).code == cli::kExitArgument);
  }

  TEST_CASE("a config file is read first and flags override it") {
    TempDir dir;
    std::ofstream(dir / "run.cfg") << "# comment\nnum_grids = 1\nfeature_channels=2\n"
                                      "data_channels=2\nsmoothing_iters=1\n";
    const Outcome o = run_cli({"params", "--config", (dir / "run.cfg").string()});
    CHECK(o.out.find("param_count=276\n") != std::string::npos);
    const Outcome o2 =
        run_cli({"params", "--config", (dir / "run.cfg").string(), "--set", "num_classes=3"});
    CHECK(o2.out.find("param_count=279\n") != std::string::npos);
  }

  TEST_CASE("data errors exit with 3") {
    TempDir dir;
    CHECK(run_cli({"split", "--manifest", (dir / "none.csv").string()}).code == cli::kExitData);
    std::ofstream(dir / "bad.csv") << "nope\n";
    CHECK(run_cli({"split", "--manifest", (dir / "bad.csv").string()}).code == cli::kExitData);
  }

  TEST_CASE("synth, split, train and eval end to end") {
    TempDir dir;
    const std::string out = dir.path().string();
    const std::string manifest = (dir / "manifest.csv").string();
    const std::string folds = (dir / "folds.csv").string();
    Outcome o = run_cli({"synth", "--out", out, "--set", "subjects_per_class=4", "--set",
                         "volume_size=8", "--seed-data", "2"});
    REQUIRE(o.code == cli::kExitOk);
    CHECK(o.out.find("scans=16\n") != std::string::npos);

    o = run_cli({"split", "--manifest", manifest, "--k", "2", "--seed-split", "5", "--out", out});
    REQUIRE(o.code == cli::kExitOk);
    CHECK(o.out.find("seed_split=5\n") != std::string::npos);
    CHECK(o.out.find("seed_model=0 # default\n") != std::string::npos);
    CHECK(std::filesystem::exists(folds));

    o = run_cli(with_model({"train", "--manifest", manifest, "--folds", folds, "--fold", "1",
                            "--epochs", "2", "--lr", "0.01", "--out", out}));
    REQUIRE(o.code == cli::kExitOk);
    CHECK(std::filesystem::exists(dir / "model.mgn3"));
    const std::string history = slurp(dir / "history.log");
    CHECK(history.rfind("epoch=1 loss=", 0) == 0);
    CHECK(history.find("\ntime=") != std::string::npos);
    CHECK(slurp(dir / "train_summary.txt").find("train_scans=8\n") != std::string::npos);

    o = run_cli({"eval", "--checkpoint", (dir / "model.mgn3").string(), "--manifest", manifest,
                 "--folds", folds, "--fold", "1"});
    REQUIRE(o.code == cli::kExitOk);
    CHECK(o.out.rfind("scans=8\naccuracy=", 0) == 0);

    o = run_cli({"eval", "--checkpoint", (dir / "model.mgn3").string(), "--manifest", manifest,
                 "--folds", folds, "--fold", "7"});
    CHECK(o.code == cli::kExitArgument);
  }

  TEST_CASE("eval on a different geometry exits with 3 naming both shapes") {
    TempDir dir;
    const std::string out = dir.path().string();
    REQUIRE(run_cli({"synth", "--out", out, "--set", "subjects_per_class=2", "--set",
                     "volume_size=6"})
                .code == cli::kExitOk);
    REQUIRE(run_cli(with_model({"train", "--manifest", (dir / "manifest.csv").string(),
                                "--epochs", "1", "--out", out}))
                .code == cli::kExitOk);
    TempDir other;
    REQUIRE(run_cli({"synth", "--out", other.path().string(), "--set", "subjects_per_class=2",
                     "--set", "volume_size=7"})
                .code == cli::kExitOk);
    const Outcome o = run_cli({"eval", "--checkpoint", (dir / "model.mgn3").string(),
                               "--manifest", (other / "manifest.csv").string()});
    CHECK(o.code == cli::kExitData);
    CHECK(o.err.find("[1,7,7,7]") != std::string::npos);
    CHECK(o.err.find("[1,6,6,6]") != std::string::npos);
  }

  TEST_CASE("divergence exits with 4") {
    TempDir dir;
    const std::string out = dir.path().string();
    REQUIRE(run_cli({"synth", "--out", out, "--set", "subjects_per_class=2", "--set",
                     "volume_size=6"})
                .code == cli::kExitOk);
    const Outcome o = run_cli(with_model({"train", "--manifest", (dir / "manifest.csv").string(),
                                          "--epochs", "3", "--lr", "1e30", "--out", out}));
    CHECK(o.code == cli::kExitDivergence);
    CHECK(o.err.find("non-finite loss") != std::string::npos);
  }
}
