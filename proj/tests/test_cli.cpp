#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rankctl_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs the CLI with stdout and stderr captured in dir; returns the exit code.
int cli(const std::string& args, const fs::path& dir) {
  const std::string cmd = std::string("\"") + RANKCTL_CLI + "\" " + args + " > \"" + (dir / "stdout.txt").string() +
                          "\" 2> \"" + (dir / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("version flag") {
  const fs::path dir = scratch("version");
  CHECK(cli("--version", dir) == 0);
  CHECK(read_file(dir / "stdout.txt").find("0.1.0") != std::string::npos);
  CHECK(cli("", dir) == 2);
  CHECK(cli("frobnicate", dir) == 2);
  CHECK(cli("run --progress-mode sometimes", dir) == 2);
}

TEST_CASE("synth writes the default dataset deterministically") {
  const fs::path dir = scratch("synth");
  REQUIRE(cli("synth --seed 3 --out \"" + (dir / "a").string() + "\"", dir) == 0);
  REQUIRE(cli("synth --seed 3 --out \"" + (dir / "b").string() + "\"", dir) == 0);
  const std::string contexts = read_file(dir / "a" / "contexts.csv");
  CHECK(lines(contexts) == 1 + 400 * 8);
  CHECK(contexts == read_file(dir / "b" / "contexts.csv"));
  CHECK(read_file(dir / "a" / "groups.csv") == read_file(dir / "b" / "groups.csv"));
  const auto manifest = nlohmann::json::parse(read_file(dir / "a" / "synth_manifest.json"));
  CHECK(manifest["num_constraints"] == 2);
  CHECK(manifest["seed"] == 3);
  CHECK(read_file(dir / "stdout.txt").find("contexts.csv") != std::string::npos);

  std::ofstream(dir / "short.json") << R"({"dataset": {"synthetic": {"horizon": 40}}})";
  REQUIRE(cli("synth --config \"" + (dir / "short.json").string() + "\" --out \"" + (dir / "c").string() + "\"",
              dir) == 0);
  CHECK(lines(read_file(dir / "c" / "contexts.csv")) == 1 + 40 * 8);
}

TEST_CASE("expected-mode runs are byte-identical and the oracle beats unconstrained") {
  const fs::path dir = scratch("run");
  std::ofstream(dir / "cfg.json") << R"({"forecast": {"offline_samples": 4, "online_forecasts": 4}})";
  const std::string base = "run --progress-mode expected --config \"" + (dir / "cfg.json").string() + "\" --out ";
  REQUIRE(cli(base + "\"" + (dir / "a").string() + "\"", dir) == 0);
  REQUIRE(cli(base + "\"" + (dir / "b").string() + "\" --workers 3", dir) == 0);
  for (const char* f : {"results.csv", "trace.csv", "run_manifest.json"}) {
    CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
  }
  std::istringstream results(read_file(dir / "a" / "results.csv"));
  std::string row;
  std::getline(results, row);
  double oracle = 0.0, unconstrained = 0.0;
  while (std::getline(results, row)) {
    std::istringstream cells(row);
    std::string name, phi, objective;
    std::getline(cells, name, ',');
    std::getline(cells, phi, ',');
    std::getline(cells, objective, ',');
    CHECK(phi == "100");
    if (name == "oracle") oracle = std::stod(objective);
    if (name == "unconstrained") unconstrained = std::stod(objective);
  }
  CHECK(oracle > unconstrained);
}

TEST_CASE("a csv config without a groups file fails with exit code 2") {
  const fs::path dir = scratch("missing");
  std::ofstream(dir / "c.csv") << "t,item_id,relevance\n1,1,0.5\n";
  std::ofstream(dir / "cfg.json")
      << R"({"dataset": {"source": "csv", "contexts": "c.csv", "groups": "g.csv"}, "intervention": {"tau": [1]}})";
  CHECK(cli("run --config \"" + (dir / "cfg.json").string() + "\"", dir) == 2);
  CHECK(read_file(dir / "stderr.txt").find("dataset.groups") != std::string::npos);
  std::ofstream(dir / "typo.json") << R"({"controlers": []})";
  CHECK(cli("run --config \"" + (dir / "typo.json").string() + "\"", dir) == 2);
  CHECK(read_file(dir / "stderr.txt").find("controlers") != std::string::npos);
}

TEST_CASE("forecast and tune commands") {
  const fs::path dir = scratch("forecast");
  std::ofstream(dir / "cfg.json") << R"({
    "forecast": {"offline_samples": 3, "online_forecasts": 2},
    "controllers": [{"kind": "stationary"}],
    "intervention": {"phi_grid": [100]},
    "tuning": {"gains": [1], "betas": [0.9], "epsilons": [1e-8]}
  })";
  const std::string cfg = " --config \"" + (dir / "cfg.json").string() + "\" --out \"" + dir.string() + "\"";
  REQUIRE(cli("forecast" + cfg, dir) == 0);
  const auto fm = nlohmann::json::parse(read_file(dir / "forecast_manifest.json"));
  CHECK(fm["offline_samples"] == 3);
  CHECK(fm["online_forecasts"] == 2);
  CHECK(fm["strata"] == "halves");
  CHECK(lines(read_file(dir / "progress_to_go.csv")) == 1 + 2 * 400 * 2);
  REQUIRE(cli("tune" + cfg, dir) == 0);
  const auto tuned = nlohmann::json::parse(read_file(dir / "tuned.json"));
  REQUIRE(tuned.size() == 1);
  CHECK(tuned[0]["controller"] == "stationary");
  CHECK(tuned[0]["gain"] == 1.0);
  CHECK(lines(read_file(dir / "tuning_log.csv")) == 2);
}
