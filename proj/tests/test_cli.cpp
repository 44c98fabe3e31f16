// End-to-end checks of the robustgp binary: artifacts, exit codes, and
// byte-level reproducibility. The binary path comes from the build system.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

#ifndef ROBUSTGP_CLI_PATH
#error "ROBUSTGP_CLI_PATH must be defined"
#endif

const std::string kCli = ROBUSTGP_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return rc < 0 ? rc : WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("generate writes the neal protocol artifacts") {
  TempDir dir("robustgp_cli_gen");
  REQUIRE(run("generate --dataset neal --noise student-t:10 --seed 7 --out " + dir.str()) == 0);
  CHECK(line_count(dir.path / "train.csv") == 101);  // header + 100 rows
  CHECK(line_count(dir.path / "test.csv") == 542);   // header + 541 rows
  CHECK(fs::exists(dir.path / "manifest.json"));
  const std::string manifest = slurp(dir.path / "manifest.json");
  CHECK(manifest.find("\"command\": \"generate\"") != std::string::npos);
  CHECK(manifest.find("train.csv") != std::string::npos);

  // byte-identical regeneration under the same seed
  TempDir dir2("robustgp_cli_gen2");
  REQUIRE(run("generate --dataset neal --noise student-t:10 --seed 7 --out " + dir2.str()) == 0);
  CHECK(slurp(dir.path / "train.csv") == slurp(dir2.path / "train.csv"));
  CHECK(slurp(dir.path / "test.csv") == slurp(dir2.path / "test.csv"));
}

TEST_CASE("generate rejects an invalid noise family with exit code 2") {
  TempDir dir("robustgp_cli_badnoise");
  CHECK(run("generate --dataset neal --noise weibull:1 --seed 1 --out " + dir.str()) == 2);
}

TEST_CASE("diagnose emits one row per input point") {
  TempDir dir("robustgp_cli_diag");
  REQUIRE(run("diagnose --dataset neal --noise normal:0.01,0.08 --seed 3 --out " + dir.str()) == 0);
  CHECK(line_count(dir.path / "diagnostics.csv") == 101);
  const std::string diag = slurp(dir.path / "diagnostics.csv");
  CHECK(diag.rfind("index,ps,weight,nu,threshold,squared_regime", 0) == 0);
}

TEST_CASE("diagnose reads csv input and reports io errors") {
  TempDir dir("robustgp_cli_diagcsv");
  const fs::path csv = dir.path / "input.csv";
  {
    std::ofstream out(csv);
    out << "a,b,y\n";
    for (int i = 0; i < 30; ++i) out << 0.1 * i << "," << 25 - i << "," << i << "\n";
  }
  REQUIRE(run("diagnose --data " + csv.string() + " --target y --out " + dir.str()) == 0);
  CHECK(line_count(dir.path / "diagnostics.csv") == 31);

  CHECK(run("diagnose --data /nonexistent/file.csv --target y --out " + dir.str()) == 4);
}

TEST_CASE("mcmc smoke fit emits the expected chain dump") {
  TempDir dir("robustgp_cli_mcmc");
  // burn-in defaults to total/5 = 40; (200 - 40)/4 = 40 records per chain.
  REQUIRE(run("fit --model huber-mcmc --dataset neal --noise normal:0.01,0.08 "
              "--seed 5 --total 200 --thin 4 --chains 1 --out " + dir.str()) == 0);
  CHECK(line_count(dir.path / "chain.csv") == 41);  // header + (200-40)/4
  CHECK(fs::exists(dir.path / "predictions.csv"));
  CHECK(fs::exists(dir.path / "hyperparams.json"));
  CHECK(fs::exists(dir.path / "metrics.csv"));
  const std::string manifest = slurp(dir.path / "manifest.json");
  CHECK(manifest.find("chain.csv") != std::string::npos);

  const std::string preds = slurp(dir.path / "predictions.csv");
  CHECK(preds.rfind("x1,mean,var,lo2sd,hi2sd", 0) == 0);
}

TEST_CASE("fit rejects an unknown model with exit code 2") {
  TempDir dir("robustgp_cli_badmodel");
  CHECK(run("fit --model boost --dataset neal --seed 1 --out " + dir.str()) == 2);
}

TEST_CASE("bench on a csv with kfold emits per-fold rows and is reproducible") {
  TempDir dir("robustgp_cli_bench");
  const fs::path csv = dir.path / "data.csv";
  {
    std::ofstream out(csv);
    out << "x1,y\n";
    for (int i = 0; i < 40; ++i) {
      const double x = -2.0 + 4.0 * i / 39.0;
      out << x << "," << x * x * 0.5 + 0.05 * ((i * 7) % 5 - 2) << "\n";
    }
  }
  const std::string common = "bench --data " + csv.string() +
                             " --target y --kfold 4 --models gp --restarts 2 "
                             "--max-iters 80 --seed 9 --out ";
  REQUIRE(run(common + (dir.path / "run1").string()) == 0);
  REQUIRE(run(common + (dir.path / "run2").string()) == 0);

  const std::string results = slurp(dir.path / "run1" / "results.csv");
  CHECK(results.rfind("dataset,noise,model,seed,case,rmse,mae,nlp,status", 0) == 0);
  CHECK(line_count(dir.path / "run1" / "results.csv") == 5);  // header + 4 folds
  CHECK(line_count(dir.path / "run1" / "summary.csv") == 2);

  // determinism: byte-identical tables across reruns
  CHECK(results == slurp(dir.path / "run2" / "results.csv"));
  CHECK(slurp(dir.path / "run1" / "summary.csv") == slurp(dir.path / "run2" / "summary.csv"));
}

TEST_CASE("config file values are overridden by flags") {
  TempDir dir("robustgp_cli_config");
  const fs::path ini = dir.path / "run.ini";
  {
    std::ofstream out(ini);
    out << "[generate]\ndataset=neal\nnoise=none\nseed=11\nn=80\n";
  }
  REQUIRE(run("--config " + ini.string() + " generate --seed 12 --out " +
              (dir.path / "a").string()) == 0);
  // same config but flag seed differs -> different draw
  REQUIRE(run("--config " + ini.string() + " generate --out " +
              (dir.path / "b").string()) == 0);
  CHECK(slurp(dir.path / "a" / "train.csv") != slurp(dir.path / "b" / "train.csv"));
  CHECK(line_count(dir.path / "a" / "train.csv") == 81);  // n from the config file
}
