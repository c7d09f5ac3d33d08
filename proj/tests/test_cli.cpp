#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "graspforge/errors.hpp"

using namespace graspforge;
namespace fs = std::filesystem;

namespace {

struct Result
{
  int code;
  std::string out;
  std::string err;
};

Result invoke(const std::vector<std::string>& args)
{
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name)
{
  const auto p = fs::temp_directory_path() / ("graspforge_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::size_t line_count(const fs::path& p)
{
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line))
    ++n;
  return n;
}

}  // namespace

TEST_CASE("gen-data then plan in both modes")
{
  const auto dir = fresh_dir("plan");
  const auto gen = invoke({"gen-data", "--fixture", "cube", "--out", dir.string(), "--seed", "4",
                           "--views-train", "4", "--views-test", "6"});
  REQUIRE(gen.code == cli::kExitOk);
  const auto manifest = (dir / "cube" / "manifest.json").string();
  CHECK(gen.out.find(manifest) != std::string::npos);

  for (const std::string mode : {"gt", "predicted"}) {
    const auto csv = dir / (mode + ".csv");
    const auto r = invoke({"plan", "--manifest", manifest, "--views", "3", "--mode", mode,
                           "--seed", "4", "--out", csv.string()});
    CHECK_MESSAGE(r.code == cli::kExitOk, r.err);
    CHECK(line_count(csv) == 1 + 3 + 1);
    CHECK(r.out.find("best Q") != std::string::npos);
  }

  const auto grid = dir / "grid.json";
  const auto rec = invoke({"reconstruct", "--manifest", manifest, "--views", "3", "--grid-res",
                           "24", "--out", grid.string()});
  CHECK_MESSAGE(rec.code == cli::kExitOk, rec.err);
  CHECK(fs::exists(grid));

  const auto t1 = invoke({"table1", "--manifest", manifest, "--shots", "1,2", "--grid-res", "24",
                          "--out", (dir / "t1.csv").string()});
  CHECK_MESSAGE(t1.code == cli::kExitOk, t1.err);
  CHECK(line_count(dir / "t1.csv") == 3);
}

TEST_CASE("missing mesh names the path")
{
  const auto r = invoke({"gen-data", "--mesh", "/nonexistent/thing.obj", "--out",
                         fresh_dir("missing").string()});
  CHECK(r.code == cli::kExitError);
  CHECK(r.err.find("/nonexistent/thing.obj") != std::string::npos);
}

TEST_CASE("bad arguments exit 2")
{
  CHECK(invoke({}).code == cli::kExitError);
  CHECK(invoke({"plan", "--manifest", "x.json"}).code == cli::kExitError);
  CHECK(invoke({"gen-data", "--fixture", "nope", "--out", fresh_dir("nope").string()}).code ==
        cli::kExitError);
  CHECK(invoke({"gen-data", "--fixture", "cube", "--mesh", "a.obj", "--out", "x"}).code ==
        cli::kExitError);
}

TEST_CASE("config parsing is strict")
{
  const auto dir = fresh_dir("config");
  fs::create_directories(dir);

  const auto ok = cli::parse_run_config(nlohmann::json::parse(
      R"({"seed": 5, "num_candidates": 300, "gripper": {"max_width": 0.06},
          "cem": {"iters": 2}, "table_normal": [0, 0, 1],
          "reconstruction": {"grid_resolution": 40}})"));
  CHECK(ok.has_seed);
  CHECK(ok.planner.seed == 5);
  CHECK(ok.planner.num_candidates == 300);
  CHECK(ok.planner.gripper.max_width == 0.06);
  CHECK(ok.planner.cem.iters == 2);
  CHECK(ok.reconstruction.grid_resolution == 40);

  CHECK_THROWS_WITH_AS(cli::parse_run_config(nlohmann::json::parse(R"({"gripper": {"maxwidth": 1}})")),
                       doctest::Contains("gripper.maxwidth"), ParseError);
  CHECK_THROWS_WITH_AS(cli::parse_run_config(nlohmann::json::parse(R"({"cem": {"elite_frac": "x"}})")),
                       doctest::Contains("cem.elite_frac"), ParseError);

  std::ofstream(dir / "bad.json") << R"({"gripper": {"friction": 0.5}})";
  const auto r = invoke({"table2", "--fixture", "cube", "--config", (dir / "bad.json").string(),
                         "--out", (dir / "t2.csv").string()});
  CHECK(r.code == cli::kExitError);
  CHECK(r.err.find("gripper.friction") != std::string::npos);
}

TEST_CASE("no grasp exits 1")
{
  const auto dir = fresh_dir("nograsp");
  REQUIRE(invoke({"gen-data", "--fixture", "ball", "--out", dir.string(), "--views-train", "2",
                  "--views-test", "3"})
              .code == cli::kExitOk);
  const auto csv = dir / "plan.csv";
  const auto r = invoke({"plan", "--manifest", (dir / "ball" / "manifest.json").string(),
                         "--views", "1", "--out", csv.string()});
  CHECK(r.code == cli::kExitNoGrasp);
  CHECK(line_count(csv) == 3);
}

TEST_CASE("table2 writes the comparison")
{
  const auto dir = fresh_dir("t2");
  const auto r = invoke({"table2", "--fixture", "thin-box", "--fixture", "cube", "--out",
                         (dir / "t2.csv").string()});
  CHECK_MESSAGE(r.code == cli::kExitOk, r.err);
  CHECK(r.out.find("thin-box multiview") != std::string::npos);
  CHECK(line_count(dir / "t2.csv") == 3);
}
