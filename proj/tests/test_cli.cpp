#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return REPALIGN_CLI_PATH; }

int run_cli(const std::string& args, const fs::path& cwd) {
  const std::string command =
      "cd '" + cwd.string() + "' && '" + std::string(cli_path()) + "' " + args +
      " >/dev/null 2>cli_stderr.log";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "repalign_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Synthetic two-domain fixture shared by the pipeline tests.
fs::path make_fixture(const std::string& name) {
  const fs::path dir = fresh_dir(name);
  write_file(dir / "synth.json", R"({
    "seed": 11,
    "output_dir": "data",
    "synth": {"n_items": 18, "n_features": 12, "weight_sparsity": 0.5,
              "noise_relative_to_signal": 0.15, "n_domains": 2,
              "shared_weights": true}
  })");
  REQUIRE(run_cli("synth --config synth.json", dir) == 0);
  return dir;
}

const char* kFitConfig = R"({
  "seed": 4,
  "output_dir": "fit_out",
  "lambda_grid": [0.5, 5, 50],
  "n_folds": 4,
  "datasets": [{"name": "domain0",
                "features": "data/domain0_features.csv",
                "similarities": "data/domain0_similarities.csv"}]
})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("fit produces weights and a report") {
  const fs::path dir = make_fixture("fit_smoke");
  write_file(dir / "fit.json", kFitConfig);
  REQUIRE(run_cli("fit --config fit.json", dir) == 0);
  CHECK(fs::exists(dir / "fit_out" / "domain0_weights.csv"));
  CHECK(fs::exists(dir / "fit_out" / "fit_report.json"));
  const std::string report = slurp(dir / "fit_out" / "fit_report.json");
  CHECK(report.find("lambda_star") != std::string::npos);
  CHECK(report.find("config_hash") != std::string::npos);
  CHECK(report.find("input_hashes") != std::string::npos);
}

TEST_CASE("reruns with the same config are byte identical") {
  const fs::path dir = make_fixture("determinism");
  write_file(dir / "fit.json", kFitConfig);
  REQUIRE(run_cli("fit --config fit.json", dir) == 0);
  const std::string report = slurp(dir / "fit_out" / "fit_report.json");
  const std::string weights = slurp(dir / "fit_out" / "domain0_weights.csv");
  REQUIRE(run_cli("fit --config fit.json", dir) == 0);
  CHECK(slurp(dir / "fit_out" / "fit_report.json") == report);
  CHECK(slurp(dir / "fit_out" / "domain0_weights.csv") == weights);
}

TEST_CASE("evaluate emits a Table-1 shaped CSV") {
  const fs::path dir = make_fixture("evaluate");
  write_file(dir / "eval.json", R"({
    "seed": 4,
    "output_dir": "eval_out",
    "lambda_grid": [1, 10],
    "n_folds": 3,
    "datasets": [
      {"name": "domain0", "features": "data/domain0_features.csv",
       "similarities": "data/domain0_similarities.csv"},
      {"name": "domain1", "features": "data/domain1_features.csv",
       "similarities": "data/domain1_similarities.csv"}
    ]
  })");
  REQUIRE(run_cli("evaluate --config eval.json --table1", dir) == 0);
  const std::string csv = slurp(dir / "eval_out" / "table1.csv");
  CHECK(csv.find("Dataset,Raw R2,Transformed R2,CV Control R2,"
                 "Human Inter-reliability") != std::string::npos);
  CHECK(csv.find("domain0,") != std::string::npos);
  CHECK(csv.find("domain1,") != std::string::npos);
}

TEST_CASE("invalid configuration exits with code 2") {
  const fs::path dir = fresh_dir("bad_config");
  CHECK(run_cli("fit --config missing.json", dir) == 2);

  write_file(dir / "bad_paths.json", R"({
    "datasets": [{"name": "x", "features": "no.csv", "similarities": "no.csv"}]
  })");
  CHECK(run_cli("fit --config bad_paths.json", dir) == 2);

  write_file(dir / "bad_mode.json", R"({"fold_mode": "bogus"})");
  CHECK(run_cli("fit --config bad_mode.json", dir) == 2);

  const std::string err = slurp(dir / "cli_stderr.log");
  CHECK(err.find("\"exit_code\":2") != std::string::npos);
}

TEST_CASE("runtime failures exit with code 1") {
  const fs::path dir = fresh_dir("runtime_error");
  // Valid config, malformed data file.
  write_file(dir / "features.csv", "item_id,f0\na,1.0\nb,oops\n");
  write_file(dir / "sim.csv", "id,a,b\na,0,1\nb,1,0\n");
  write_file(dir / "cfg.json", R"({
    "datasets": [{"name": "x", "features": "features.csv",
                  "similarities": "sim.csv"}]
  })");
  CHECK(run_cli("fit --config cfg.json", dir) == 1);
  const std::string err = slurp(dir / "cli_stderr.log");
  CHECK(err.find("\"exit_code\":1") != std::string::npos);
}

TEST_CASE("lodo refuses a single domain") {
  const fs::path dir = make_fixture("lodo_arity");
  write_file(dir / "one.json", R"({
    "datasets": [{"name": "domain0",
                  "features": "data/domain0_features.csv",
                  "similarities": "data/domain0_similarities.csv"}]
  })");
  CHECK(run_cli("lodo --config one.json", dir) == 2);
}

TEST_CASE("dendrogram accepts only centroid linkage") {
  const fs::path dir = make_fixture("linkage");
  write_file(dir / "den.json", R"({
    "output_dir": "den_out",
    "datasets": [{"name": "domain0",
                  "features": "data/domain0_features.csv",
                  "similarities": "data/domain0_similarities.csv"}]
  })");
  CHECK(run_cli("dendrogram --config den.json --linkage single", dir) == 2);
  REQUIRE(run_cli("dendrogram --config den.json --linkage centroid", dir) == 0);
  CHECK(fs::exists(dir / "den_out" / "domain0_merges.csv"));
  CHECK(fs::exists(dir / "den_out" / "domain0_tree.newick"));
}

TEST_CASE("ingest aggregates ratings into a similarity file") {
  const fs::path dir = fresh_dir("ingest");
  write_file(dir / "ratings.csv",
             "item_a,item_b,rating,rater_id\n"
             "a,b,4,r1\na,b,6,r2\na,c,9,r1\nb,c,2,r2\n");
  write_file(dir / "cfg.json", R"({
    "output_dir": "out",
    "datasets": [{"name": "tiny", "ratings": "ratings.csv"}]
  })");
  REQUIRE(run_cli("ingest --config cfg.json", dir) == 0);
  const std::string csv = slurp(dir / "out" / "tiny_similarities.csv");
  CHECK(csv.find("a,,5,9") != std::string::npos);
}

TEST_CASE("strict report mode fails on gaps") {
  const fs::path dir = fresh_dir("strict_report");
  write_file(dir / "partial.json", R"({
    "transfers": [{"training_set": "a", "test_set": "b"}]
  })");
  write_file(dir / "cfg.json", R"({
    "output_dir": "rep",
    "reports": {"table2": "partial.json"}
  })");
  REQUIRE(run_cli("report --config cfg.json", dir) == 0);
  CHECK(slurp(dir / "rep" / "table2.csv").find("a,b,\n") != std::string::npos);
  CHECK(run_cli("report --config cfg.json --strict", dir) == 1);
}

}  // TEST_SUITE
