#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <unistd.h>

#include "autonomy/cli.hpp"

using namespace autonomy;
using namespace autonomy::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("autonomy_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

int column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

TEST_CASE("config defaults") {
  const ExperimentConfig cfg = parse_config(json::object(), "photodetect-ensemble");
  CHECK(cfg.params.kappa == 1.0);
  CHECK(cfg.params.dt == 1e-3);
  CHECK(cfg.params.horizon == std::numbers::ln2);
  CHECK(cfg.params.dim == 40);
  CHECK(cfg.subblock == 20);
  CHECK(cfg.trajectories == 10000);
  REQUIRE(cfg.state);
  CHECK(cfg.state->kind == StateSpec::Kind::Fock);
  CHECK(cfg.state->n == 5);

  const ExperimentConfig het = parse_config(json(nullptr), "heterodyne-ensemble");
  REQUIRE(het.state);
  CHECK(het.state->kind == StateSpec::Kind::Coherent);
  CHECK(het.state->alpha == Complex(1.0, 0.0));

  const ExperimentConfig custom = parse_config(
      json::parse(R"({"kappa": 2, "state": {"kind": "coherent", "re": 0.5, "im": -0.5}, "grid": {"steps": 10}})"),
      "heterodyne-ensemble");
  CHECK(custom.params.kappa == 2.0);
  CHECK(custom.state->alpha == Complex(0.5, -0.5));
  CHECK(custom.grid.steps == 10);
}

TEST_CASE("config rejects unknown keys and bad values") {
  const std::string e = "photodetect-ensemble";
  CHECK_THROWS_AS(parse_config(json::parse(R"({"kapa": 1})"), e), UsageError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"grid": {"spacing": 0.1, "size": 3}})"), e), UsageError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"state": {"kind": "fock", "m": 1}})"), e), UsageError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"state": {"kind": "squeezed"}})"), e), UsageError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"kappa": "fast"})"), e), UsageError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"kappa": 0})"), e), UsageError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"dt": 0.1})"), e), UsageError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"subblock": 41})"), e), UsageError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"state": {"kind": "fock", "n": 40}})"), e), UsageError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"experiment": "evolve-kod"})"), e), UsageError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"series": ["histogram"]})"), e), UsageError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"sweep": [3, 2]})"), e), UsageError);
  CHECK_THROWS_AS(parse_config(json::object(), "photodetect"), UsageError);
}

TEST_CASE("config hash") {
  const std::string e = "photodetect-ensemble";
  const ExperimentConfig a = parse_config(json::parse(R"({"seed": 1, "kappa": 1.0, "dt": 0.001})"), e);
  const ExperimentConfig b = parse_config(json::parse(R"({"dt": 0.001, "kappa": 1.0, "seed": 1})"), e);
  ExperimentConfig c = a;
  c.out = "elsewhere";
  c.threads = 7;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) == config_hash(c));
  CHECK(config_hash(a).size() == 64);

  ExperimentConfig d = a;
  d.seed = 2;
  ExperimentConfig f = a;
  f.trajectories = 10001;
  const ExperimentConfig g = parse_config(json::parse(R"({"seed": 1})"), "evolve-kod");
  CHECK(config_hash(a) != config_hash(d));
  CHECK(config_hash(a) != config_hash(f));
  CHECK(config_hash(a) != config_hash(g));
}

TEST_CASE("number formatting and CSV quoting") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(std::nan("")).empty());
  for (double v : {1e-300, std::numbers::pi, -2.5e17, 1.0 / 3.0}) CHECK(std::stod(format_number(v)) == v);

  const fs::path dir = scratch("table");
  Table t;
  t.header = {"a", "b"};
  t.rows = {{"plain", "with,comma"}, {"say \"hi\"", "line\nbreak"}};
  t.write(dir / "t.csv");
  CHECK(slurp(dir / "t.csv") == "a,b\nplain,\"with,comma\"\n\"say \"\"hi\"\"\",\"line\nbreak\"\n");
}

TEST_CASE("thread count resolution") {
  ::unsetenv("INSTRUMENT_AUTONOMY_THREADS");
  CHECK(resolve_threads(3u) == 3);
  CHECK_THROWS_AS(resolve_threads(0u), UsageError);
  CHECK(resolve_threads(std::nullopt) >= 1);
  ::setenv("INSTRUMENT_AUTONOMY_THREADS", "5", 1);
  CHECK(resolve_threads(std::nullopt) == 5);
  CHECK(resolve_threads(2u) == 2);
  ::setenv("INSTRUMENT_AUTONOMY_THREADS", "many", 1);
  CHECK_THROWS_AS(resolve_threads(std::nullopt), UsageError);
  ::unsetenv("INSTRUMENT_AUTONOMY_THREADS");
}

TEST_CASE("identity verification run") {
  ExperimentConfig cfg = parse_config(json::object(), "verify-identities");
  cfg.out = scratch("identities");
  const VerificationReport rep = run(cfg);
  for (const Check& c : rep.checks) {
    INFO(c.name << " measured " << c.measured << " threshold " << c.threshold);
    CHECK(c.pass);
  }
  CHECK(rep.pass());
  CHECK(rep.checks.size() >= 10);

  const json report = json::parse(slurp(cfg.out / "report.json"));
  CHECK(report.at("pass").get<bool>());
  CHECK(report.at("provenance").at("config_hash").get<std::string>() == config_hash(cfg));
  CHECK(report.at("provenance").at("version").get<std::string>() == kVersion);
  for (const auto& f : report.at("outputs")) CHECK(fs::exists(cfg.out / f.get<std::string>()));

  const auto rows = read_csv(cfg.out / "results.csv");
  const int hash_col = column(rows.front(), "config_hash");
  REQUIRE(hash_col >= 0);
  for (std::size_t r = 1; r < rows.size(); ++r) CHECK(rows[r][hash_col] == config_hash(cfg));
}

TEST_CASE("empty ensemble still reports analytic columns") {
  ExperimentConfig cfg = parse_config(json::parse(R"({"trajectories": 0})"), "photodetect-ensemble");
  cfg.out = scratch("empty");
  const VerificationReport rep = run(cfg);
  CHECK(rep.pass());
  const auto rows = read_csv(cfg.out / "results.csv");
  const int born = column(rows.front(), "born");
  const int empirical = column(rows.front(), "trajectory_empirical");
  REQUIRE(born >= 0);
  REQUIRE(empirical >= 0);
  CHECK(rows.size() > 6);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    CHECK(!rows[r][born].empty());
    CHECK(rows[r][empirical].empty());
  }
}

TEST_CASE("outputs do not depend on thread count or reruns") {
  for (const char* experiment : {"photodetect-ensemble", "heterodyne-ensemble"}) {
    ExperimentConfig cfg = parse_config(json::parse(R"({"trajectories": 300, "seed": 11})"), experiment);
    std::vector<std::map<std::string, std::string>> snapshots;
    for (unsigned threads : {1u, 3u, 3u}) {
      cfg.threads = threads;
      cfg.out = scratch(std::string(experiment) + std::to_string(snapshots.size()));
      const VerificationReport rep = run(cfg);
      std::map<std::string, std::string> files;
      for (const auto& f : rep.outputs) files[f] = slurp(cfg.out / f);
      snapshots.push_back(files);
    }
    CHECK(snapshots[0] == snapshots[1]);
    CHECK(snapshots[1] == snapshots[2]);
  }
}

TEST_CASE("plot series") {
  ExperimentConfig cfg = parse_config(json::object(), "povm-convergence");
  const fs::path dir = scratch("plots");
  CHECK_THROWS_AS(emit_plot_data({}, {"nonsense"}, cfg, dir), SpecError);

  const auto files = emit_plot_data({}, {"lambda", "sigma", "beta_cooling", "beta_cooling_exact"}, cfg, dir);
  CHECK(files.size() == 4);
  const auto lambda = read_csv(dir / "plot_lambda.csv");
  const auto sigma = read_csv(dir / "plot_sigma.csv");
  CHECK(lambda.front().size() == 2);
  CHECK(std::stod(lambda.back()[0]) == doctest::Approx(5.0));
  CHECK(std::stod(lambda.back()[1]) > 0.99);
  for (std::size_t r = 2; r < lambda.size(); ++r) {
    CHECK(std::stod(lambda[r][1]) > std::stod(lambda[r - 1][1]));
    CHECK(lambda[r] == sigma[r]);
  }
  const auto beta = read_csv(dir / "plot_beta_cooling.csv");
  const auto exact = read_csv(dir / "plot_beta_cooling_exact.csv");
  REQUIRE(beta.size() == exact.size());
  for (std::size_t r = 1; r < beta.size(); ++r) {
    CHECK(std::abs(std::stod(beta[r][1]) / std::stod(exact[r][1]) - 1.0) < 0.03);
  }
}

TEST_CASE("density matrix files") {
  const fs::path dir = scratch("density");
  json real = json::array(), imag = json::array();
  for (int r = 0; r < 40; ++r) {
    json row_re = json::array(), row_im = json::array();
    for (int c = 0; c < 40; ++c) {
      double v = 0.0, w = 0.0;
      if (r == c && (r == 1 || r == 3)) v = 0.5;
      if (r == 1 && c == 3) w = 0.2;
      if (r == 3 && c == 1) w = -0.2;
      row_re.push_back(v);
      row_im.push_back(w);
    }
    real.push_back(row_re);
    imag.push_back(row_im);
  }
  {
    std::ofstream(dir / "rho.json") << json{{"real", real}, {"imag", imag}}.dump();
  }
  const json spec = {{"state", {{"kind", "density"}, {"path", (dir / "rho.json").string()}}}, {"trajectories", 500}};
  ExperimentConfig cfg = parse_config(spec, "photodetect-ensemble");
  const DensityOperator rho = resolve_state(cfg);
  CHECK(rho.matrix()(1, 3) == Complex(0.0, 0.2));
  cfg.out = dir / "out";
  CHECK(run(cfg).pass());

  const std::string before = config_hash(cfg);
  real[1][1] = 0.4;
  real[3][3] = 0.6;
  {
    std::ofstream(dir / "rho.json") << json{{"real", real}, {"imag", imag}}.dump();
  }
  CHECK(config_hash(cfg) != before);

  {
    std::ofstream(dir / "small.json") << json{{"real", {{1.0}}}}.dump();
  }
  ExperimentConfig small = parse_config({{"state", {{"kind", "density"}, {"path", (dir / "small.json").string()}}}},
                                        "photodetect-ensemble");
  CHECK_THROWS_AS(resolve_state(small), UsageError);
}
