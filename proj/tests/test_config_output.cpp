#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fade/cli.hpp"
#include "fade/config.hpp"
#include "fade/output.hpp"

using fade::ExperimentConfig;

namespace {

const char* kMinimalConfig = R"cfg(
[model]
source = generate
agents = 4
dim = 2
obs_dim = 2
rank = 2
seed = 1

[theta]
values = 1 2

[network]
source = generate
edge_sets = 2
density = 0.6
seed = 2

[run]
horizon = 12
)cfg";

ExperimentConfig parse_text(const std::string& text, const std::string& name = "test.cfg") {
  std::stringstream ss(text);
  return fade::parse_config(ss, name);
}

std::filesystem::path temp_dir(const std::string& leaf) {
  const auto dir = std::filesystem::temp_directory_path() / leaf;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("minimal config parses with defaults") {
  const ExperimentConfig cfg = parse_text(kMinimalConfig);
  CHECK(cfg.model.agents == 4);
  CHECK(cfg.theta == std::vector<double>{1.0, 2.0});
  CHECK(cfg.network.density == 0.6);
  CHECK(cfg.run.horizon == 12);
  CHECK(cfg.run.runs == 1);
  CHECK(cfg.run.decimation == 10);
  CHECK(cfg.run.record == fade::RecordKind::kErrors);
  CHECK(cfg.estimators.fade);
  CHECK(cfg.estimators.ci);
  CHECK(cfg.estimators.ml);
  CHECK(cfg.estimators.ci_r == 0.05);
  CHECK(cfg.model.blind_agent == -1);
}

TEST_CASE("parse errors carry the file name and line") {
  const std::string bad = "[model]\nsource = generate\nbogus_key = 1\n";
  CHECK_THROWS_WITH(parse_text(bad, "exp.cfg"),
                    Catch::Matchers::ContainsSubstring("exp.cfg:3") &&
                        Catch::Matchers::ContainsSubstring("bogus_key"));
  CHECK_THROWS_WITH(parse_text("[nope]\n"), Catch::Matchers::ContainsSubstring("unknown section"));
  CHECK_THROWS_WITH(parse_text("x = 1\n"), Catch::Matchers::ContainsSubstring("outside any section"));
}

TEST_CASE("structural requirements are enforced at parse time") {
  auto with_patch = [&](const std::string& from, const std::string& to) {
    std::string text = kMinimalConfig;
    const auto at = text.find(from);
    REQUIRE(at != std::string::npos);
    text.replace(at, from.size(), to);
    return text;
  };
  CHECK_THROWS_WITH(parse_text(with_patch("horizon = 12", "horizon = 0")),
                    Catch::Matchers::ContainsSubstring("horizon"));
  CHECK_THROWS_WITH(parse_text(std::string(kMinimalConfig) + "runs = 0\n"),
                    Catch::Matchers::ContainsSubstring("runs"));
  CHECK_THROWS_WITH(parse_text(with_patch("density = 0.6", "density = 1.5")),
                    Catch::Matchers::ContainsSubstring("density"));
  CHECK_THROWS_WITH(parse_text(std::string(kMinimalConfig) +
                               "\n[estimators]\nci_r = 0.7\n"),
                    Catch::Matchers::ContainsSubstring("ci_r"));
  CHECK_THROWS_WITH(parse_text(std::string(kMinimalConfig) +
                               "\n[model]\nblind_agent = 1\n"),
                    Catch::Matchers::ContainsSubstring("blind_agent"));
  // Missing theta.
  CHECK_THROWS_WITH(parse_text("[model]\nsource = generate\nagents = 4\ndim = 2\n"
                               "obs_dim = 2\nrank = 2\nseed = 1\n"
                               "[network]\nsource = generate\nedge_sets = 1\n"
                               "density = 0.5\nseed = 2\n[run]\nhorizon = 5\n"),
                    Catch::Matchers::ContainsSubstring("values"));
}

TEST_CASE("echo round-trips to an identical configuration") {
  for (const char* name : {"sparse.cfg", "dense.cfg", "fig1.cfg"}) {
    const auto path = std::filesystem::path(FADE_CONFIG_DIR) / name;
    const ExperimentConfig cfg = fade::parse_config(path);
    const std::string echoed = fade::echo_config(cfg);
    const ExperimentConfig again = parse_text(echoed, name);
    CHECK(fade::echo_config(again) == echoed);
    CHECK(again.theta == cfg.theta);
    CHECK(again.run.base_seed == cfg.run.base_seed);
    CHECK(again.network.density == cfg.network.density);
    CHECK(again.model.blind_agent == cfg.model.blind_agent);
    CHECK(again.run.record == cfg.run.record);
  }
}

TEST_CASE("curves csv format is frozen") {
  fade::McSummary summary;
  summary.times = {5};
  summary.runs = 2;
  fade::ErrorCurve curve;
  curve.times = {5};
  curve.runs = 2;
  curve.mse = Eigen::MatrixXd::Constant(1, 1, 0.1);
  curve.scaled_mse = Eigen::MatrixXd::Constant(1, 1, 0.5);
  curve.mse_stderr = Eigen::MatrixXd::Constant(1, 1, 0.01);
  curve.bias = {Eigen::MatrixXd::Constant(1, 1, 0.25)};
  summary.curves[int(fade::EstimatorKind::kFade)] = curve;
  std::ostringstream os;
  fade::write_curves_csv(os, summary);
  CHECK(os.str() ==
        "estimator,t,agent,mse,scaled_mse,bias_norm,mse_stderr\n"
        "fade,5,1,0.10000000000000001,0.5,0.25,0.01\n");
}

TEST_CASE("run command writes a reproducible bundle") {
  const auto dir = temp_dir("fade_cli_test");
  const auto cfg_path = dir / "exp.cfg";
  {
    std::ofstream os(cfg_path);
    os << kMinimalConfig << "runs = 3\nbase_seed = 77\ndecimation = 4\n";
  }
  fade::RunOptions opts;
  opts.config_path = cfg_path.string();
  opts.out_dir = (dir / "out1").string();
  std::ostringstream out, err;
  REQUIRE(fade::cmd_run(opts, out, err) == 0);
  INFO(err.str());
  CHECK(std::filesystem::exists(dir / "out1" / "curves.csv"));
  CHECK(std::filesystem::exists(dir / "out1" / "manifest.cfg"));

  // The manifest is a valid config and reruns to the same curves.
  fade::RunOptions again;
  again.config_path = (dir / "out1" / "manifest.cfg").string();
  again.out_dir = (dir / "out2").string();
  REQUIRE(fade::cmd_run(again, out, err) == 0);
  CHECK(read_file(dir / "out1" / "curves.csv") == read_file(dir / "out2" / "curves.csv"));
}

TEST_CASE("environment variable overrides the output directory") {
  const auto dir = temp_dir("fade_cli_env_test");
  const auto cfg_path = dir / "exp.cfg";
  {
    std::ofstream os(cfg_path);
    os << kMinimalConfig;
  }
  fade::RunOptions opts;
  opts.config_path = cfg_path.string();
  opts.out_dir = (dir / "flag").string();
  const auto env_dir = dir / "env";
  ::setenv("FADE_OUT_DIR", env_dir.string().c_str(), 1);
  std::ostringstream out, err;
  const int rc = fade::cmd_run(opts, out, err);
  ::unsetenv("FADE_OUT_DIR");
  REQUIRE(rc == 0);
  CHECK(std::filesystem::exists(env_dir / "curves.csv"));
  CHECK_FALSE(std::filesystem::exists(dir / "flag" / "curves.csv"));
}

TEST_CASE("run command reports usage and validation failures distinctly") {
  std::ostringstream out, err;
  fade::RunOptions missing;
  missing.config_path = "/nonexistent/exp.cfg";
  missing.out_dir = ".";
  CHECK(fade::cmd_run(missing, out, err) == 1);

  const auto dir = temp_dir("fade_cli_codes_test");
  const auto cfg_path = dir / "exp.cfg";
  {
    std::ofstream os(cfg_path);
    // Valid syntax, but the network never reaches node 4.
    os << "[model]\nsource = generate\nagents = 4\ndim = 2\nobs_dim = 2\n"
          "rank = 2\nseed = 3\n[theta]\nvalues = 1 2\n[network]\nsource = file\n"
          "path = disc.ens\n[run]\nhorizon = 5\n";
    std::ofstream ens(dir / "disc.ens");
    ens << "4 1\n1 1 2\n1 2\n2 3\n";
  }
  fade::RunOptions opts;
  opts.config_path = cfg_path.string();
  opts.out_dir = (dir / "out").string();
  std::ostringstream out2, err2;
  CHECK(fade::cmd_run(opts, out2, err2) == 2);
  CHECK(out2.str().find("Assumption 3") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "out" / "curves.csv"));

  // No output directory anywhere.
  fade::RunOptions no_out;
  no_out.config_path = cfg_path.string();
  std::ostringstream out3, err3;
  CHECK(fade::cmd_run(no_out, out3, err3) == 1);
}

TEST_CASE("trajectory output tracks one coordinate per estimator") {
  const auto dir = temp_dir("fade_traj_test");
  const auto cfg_path = dir / "exp.cfg";
  {
    std::ofstream os(cfg_path);
    os << kMinimalConfig
       << "record = estimates\ndecimation = 1\ntrack_agent = 2\ntrack_coord = 1\n";
  }
  fade::RunOptions opts;
  opts.config_path = cfg_path.string();
  opts.out_dir = (dir / "out").string();
  std::ostringstream out, err;
  REQUIRE(fade::cmd_run(opts, out, err) == 0);
  const std::string csv = read_file(dir / "out" / "trajectory.csv");
  std::stringstream ss(csv);
  std::string header;
  std::getline(ss, header);
  CHECK(header == "t,fade,ci,ml,true");
  int rows = 0;
  std::string line;
  while (std::getline(ss, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 12);  // horizon 12, decimation 1
  // Last column is the constant truth.
  CHECK(csv.find(",1\n") != std::string::npos);
}

TEST_CASE("validator passes a valid fixture and flags a broken one") {
  std::ostringstream out, err;
  const auto fixtures = std::filesystem::path(FADE_FIXTURE_DIR);
  CHECK(fade::cmd_validate((fixtures / "valid.cfg").string(), out, err) == 0);
  CHECK(out.str().find("validation OK") != std::string::npos);

  std::ostringstream out2, err2;
  CHECK(fade::cmd_validate((fixtures / "rank_deficient.cfg").string(), out2, err2) == 2);
  CHECK(out2.str().find("[FAIL] Assumption 2") != std::string::npos);
  CHECK(out2.str().find("validation FAILED") != std::string::npos);
}
