#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include <json.hpp>

#include "ssm/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ssm_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "ssmtool");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return ssm::cli::run(static_cast<int>(argv.size()), argv.data());
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

void write_e1(const TempDir& tmp) {
  write_text(tmp.file("a.mtx"), "%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n1 1 1\n2 2 2\n3 3 4\n");
  write_text(tmp.file("b.csv"), "0.5,0\n0,0.5\n0,0\n");
  write_text(tmp.file("e1.toml"), "A = \"a.mtx\"\nB = \"b.csv\"\nr = 2\n");
}

}  // namespace

TEST_CASE("solve: E1 problem file") {
  TempDir tmp;
  write_e1(tmp);
  CHECK(run({"solve", "--problem", tmp.file("e1.toml"), "--solver", "ssm", "--tol", "1e-8", "--out",
             tmp.file("r.json")}) == 0);
  const auto j = read_json(tmp.file("r.json"));
  CHECK(j["certificate"]["qualified"] == true);
  CHECK(j["objective"].get<double>() == doctest::Approx(0.5).epsilon(1e-8));

  // R-GD capped at one iteration cannot converge: exit 3, report still written.
  CHECK(run({"solve", "--problem", tmp.file("e1.toml"), "--solver", "rgd", "--max-iter", "1", "--out",
             tmp.file("r2.json")}) == 3);
  CHECK(read_json(tmp.file("r2.json"))["termination"] == "max_iterations");
}

TEST_CASE("exit codes for usage and format errors") {
  TempDir tmp;
  write_e1(tmp);
  CHECK(run({}) == 1);
  CHECK(run({"frobnicate"}) == 1);
  CHECK(run({"--help"}) == 0);
  CHECK(run({"solve", "--problem", tmp.file("e1.toml"), "--solver", "lbfgs", "--out", tmp.file("x.json")}) == 1);
  CHECK(run({"solve", "--problem", tmp.file("missing.toml"), "--out", tmp.file("x.json")}) == 1);
  write_text(tmp.file("bad.toml"), "A = \"a.mtx\"\nB = \"nothere.csv\"\n");
  CHECK(run({"solve", "--problem", tmp.file("bad.toml"), "--out", tmp.file("x.json")}) == 2);
  write_text(tmp.file("junk.mtx"), "not a matrix\n");
  CHECK(run({"eigs", "--matrix", tmp.file("junk.mtx")}) == 2);
}

TEST_CASE("circles then classify") {
  TempDir tmp;
  CHECK(run({"circles", "--seed", "2", "--n-per", "150", "--noise", "0.1", "--out", tmp.file("c.csv"),
             "--truth-out", tmp.file("t.csv"), "--labels-out", tmp.file("l.csv")}) == 0);
  CHECK(run({"classify", "--points", tmp.file("c.csv"), "--labels", tmp.file("l.csv"), "--truth",
             tmp.file("t.csv"), "--k", "10", "--classes", "3", "--out", tmp.file("out.json")}) == 0);
  const auto j = read_json(tmp.file("out.json"));
  CHECK(j.contains("accuracy"));
  CHECK(j["accuracy"].get<double>() >= 0.9);
  CHECK(j["labels"].size() == 450);
  CHECK(j["conductance"].size() == 3);

  // Without ground truth the field is present but null.
  CHECK(run({"classify", "--points", tmp.file("c.csv"), "--labels", tmp.file("l.csv"), "--classes", "3",
             "--out", tmp.file("out2.json")}) == 0);
  CHECK(read_json(tmp.file("out2.json"))["accuracy"].is_null());
  // Cardinalities that do not add up to the vertex count.
  CHECK(run({"classify", "--points", tmp.file("c.csv"), "--labels", tmp.file("l.csv"), "--classes", "3",
             "--cardinalities", "1,2,3", "--out", tmp.file("out3.json")}) == 1);
}

TEST_CASE("eigs on a Matrix Market Laplacian") {
  TempDir tmp;
  // Path graph on 6 vertices.
  std::string mtx = "%%MatrixMarket matrix coordinate real symmetric\n6 6 11\n";
  for (int i = 1; i <= 6; ++i) mtx += std::to_string(i) + " " + std::to_string(i) + " " + (i == 1 || i == 6 ? "1" : "2") + "\n";
  for (int i = 1; i < 6; ++i) mtx += std::to_string(i + 1) + " " + std::to_string(i) + " -1\n";
  write_text(tmp.file("p.mtx"), mtx);
  CHECK(run({"eigs", "--matrix", tmp.file("p.mtx"), "--k", "2", "--deflate-ones", "--out", tmp.file("e.json")}) == 0);
  const auto j = read_json(tmp.file("e.json"));
  // Path Laplacian eigenvalues 2 - 2 cos(pi j / 6).
  CHECK(j["values"][0].get<double>() == doctest::Approx(2 - 2 * std::cos(M_PI / 6)).epsilon(1e-8));
  CHECK(j["values"][1].get<double>() == doctest::Approx(2 - 2 * std::cos(2 * M_PI / 6)).epsilon(1e-8));
  CHECK(fs::exists(tmp.file("e.json.vectors.csv")));
}

TEST_CASE("bench: circles x 3 solvers x 5 seeds gives 15 rows") {
  TempDir tmp;
  const int code = run({"bench", "--suite", "circles", "--solvers", "ssm,rgd,pg", "--seeds", "5", "--out",
                        tmp.file("b.csv"), "--emit-plot-data", tmp.file("plot.csv")});
  CHECK(code == 0);
  std::ifstream in(tmp.file("b.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("dataset,solver,seed,objective,residual", 0) == 0);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 15);
  CHECK(fs::file_size(tmp.file("plot.csv")) > 0);
}
