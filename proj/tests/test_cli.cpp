#include "doctest.h"
#include "wavsym/cli.hpp"
#include "wavsym/common.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace wavsym;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("wavsym_test_cli_" + name);
  std::filesystem::remove_all(p);
  return p;
}

int exit_status(const std::string& args) {
  const int r = std::system((std::string(WAVSYM_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(r) ? WEXITSTATUS(r) : -1;
}

const json classify_cfg = {{"command", "classify"},
                           {"symbol", {{"builtin", "gaussian"}}},
                           {"bounds", {{"jmax", 2}, {"j2max", 2}, {"window", {{-4, 4}, {-4, 4}}}}}};

} // namespace

TEST_CASE("validate") {
  for (const auto& e : std::filesystem::directory_iterator(WAVSYM_CONFIGS)) {
    CAPTURE(e.path().string());
    CHECK(validate_file(e.path().string()).empty());
  }

  json missing = classify_cfg;
  missing.erase("symbol");
  const auto d1 = validate_config(missing);
  REQUIRE(d1.size() == 1);
  CHECK(d1[0].rule == "symbol");

  json big = classify_cfg;
  big["bounds"]["jmax"] = 12;
  big["bounds"]["j2max"] = 12;
  const auto d2 = validate_config(big);
  REQUIRE(d2.size() == 1);
  CHECK(d2[0].rule == "grid budget");

  CHECK(validate_config(json{{"command", "fly"}}).size() == 1);
  json bad_tol = classify_cfg;
  bad_tol["tolerances"] = {{"tail", 0.0}};
  CHECK(validate_config(bad_tol).size() == 1);

  CHECK_THROWS_AS(validate_file("/nonexistent/wavsym.json"), Error);
}

TEST_CASE("normalize fills defaults") {
  const json c = normalize_config(classify_cfg);
  CHECK(c["class"]["rho"] == 1.0);
  CHECK(c["classify"]["alpha_max"] == 2);
  CHECK(c["bounds"]["jmax"] == 2);
  CHECK(c["seed"] == 0);
  CHECK(normalize_config(c) == c);
  CHECK_THROWS_AS(normalize_config(json{{"command", "kernel"}}), Error);
}

TEST_CASE("reports are reproducible") {
  json cfg = {{"command", "kernel"},
              {"symbol", {{"builtin", "gauss_multiplier"}, {"m", -1}}},
              {"class", {{"m", -1}, {"rho", 1}, {"delta", 0}}},
              {"bounds", {{"jmax", 1}, {"j2max", 1}, {"window", {{-2, 2}, {-4, 4}}}}},
              {"kernel", {{"trials", 3}}},
              {"seed", 11}};
  const auto a = run(cfg);
  const auto b = run(cfg);
  CHECK(a.dump() == b.dump());
  CHECK(a.body["results"]["consistency"]["pass"] == true);

  // the echoed config runs to the same results
  const auto c = run(a.body["config"]);
  CHECK(c.dump() == a.dump());

  cfg["seed"] = 12;
  CHECK(run(cfg).body["results"]["consistency"] != a.body["results"]["consistency"]);

  const auto d1 = scratch("a"), d2 = scratch("b");
  write_report(a, d1.string());
  write_report(b, d2.string());
  CHECK(slurp(d1 / "report.json") == slurp(d2 / "report.json"));
  CHECK(std::filesystem::exists(d1 / "run_info.json"));
  CHECK(std::filesystem::exists(d1 / "kernel_envelope.dat"));
  // two-column plot data
  std::istringstream env(slurp(d1 / "kernel_envelope.dat"));
  std::string line;
  std::getline(env, line);
  std::istringstream cols(line);
  double u, v;
  CHECK(static_cast<bool>(cols >> u >> v));
}

TEST_CASE("binary exit codes") {
  const auto dir = scratch("bin");
  std::filesystem::create_directories(dir);
  const auto good = dir / "good.json", broken = dir / "broken.json", nosym = dir / "nosym.json";
  std::ofstream(good) << classify_cfg.dump();
  std::ofstream(broken) << "{ not json";
  json ns = classify_cfg;
  ns.erase("symbol");
  std::ofstream(nosym) << ns.dump();

  CHECK(exit_status("classify --config " + good.string() + " --out " + (dir / "o1").string()) == 0);
  CHECK(exit_status("classify --config " + good.string() + " --out " + (dir / "o2").string() + " --threads 1") == 0);
  CHECK(slurp(dir / "o1" / "report.json") == slurp(dir / "o2" / "report.json"));
  CHECK(exit_status("validate --config " + good.string()) == 0);
  CHECK(exit_status("validate --config " + nosym.string()) == static_cast<int>(ErrorCode::config));
  CHECK(exit_status("classify --config " + broken.string()) == static_cast<int>(ErrorCode::config));
  CHECK(exit_status("classify --config " + (dir / "absent.json").string()) == static_cast<int>(ErrorCode::io));
  CHECK(exit_status("kernel --config " + good.string()) == static_cast<int>(ErrorCode::config));
  CHECK(exit_status("fly --config " + good.string()) == static_cast<int>(ErrorCode::config));
}
