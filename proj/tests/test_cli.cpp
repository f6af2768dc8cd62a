#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdio>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "zoorun/zrt1.hpp"

using namespace zoorun;
using nlohmann::json;
using testsup::TempDir;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string out;
};

// Runs the CLI with fixture-backed environment variables; stderr is left on
// the test's own stderr.
CmdResult cli(const TempDir& home, const std::string& args) {
  const std::string cmd =
      "ZOORUN_REGISTRY='" +
      (testsup::fixtures_dir() / "registry.json").string() +
      "' ZOORUN_INDEX='" + (testsup::fixtures_dir() / "index.json").string() +
      "' ZOORUN_ENGINES='" + (home.path() / "engines").string() +
      "' ZOORUN_MODELS='" + (home.path() / "models").string() + "' '" +
      testsup::cli_bin().string() + "' " + args;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  CmdResult r;
  char buf[4096];
  size_t n;
  while ((n = ::fread(buf, 1, sizeof(buf), p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  TempDir home;
  CHECK(cli(home, "").exit_code == 1);
  CHECK(cli(home, "frobnicate 2>/dev/null").exit_code == 1);
  CHECK(cli(home, "run 2>/dev/null").exit_code == 1);
  CHECK(cli(home, "run no-such-model --input x.zrt 2>/dev/null").exit_code ==
        1);
}

TEST_CASE("engines resolve prints the chosen version") {
  TempDir home;
  auto r = cli(home, "engines resolve pytorch 1.5.0");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "pytorch 1.13.1\n");
  // Engine-class failures exit with code 3.
  CHECK(cli(home, "engines resolve pytorch 3.0.0 2>/dev/null").exit_code == 3);
}

TEST_CASE("engines install then list") {
  TempDir home;
  CHECK(cli(home, "engines install reference 1.0.0").exit_code == 0);
  auto r = cli(home, "engines list");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "reference-1.0.0-linux-x86_64-cpu\n");
  auto rj = cli(home, "engines list --json");
  CHECK(rj.exit_code == 0);
  auto doc = json::parse(rj.out);
  REQUIRE(doc["engines"].size() == 1);
  CHECK(doc["engines"][0]["version"] == "1.0.0");
}

TEST_CASE("models search and download") {
  TempDir home;
  auto r = cli(home, "models search pool");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("ref-pool") != std::string::npos);

  auto d = cli(home, "models download ref-identity");
  CHECK(d.exit_code == 0);
  CHECK(d.out.find("ref-identity") != std::string::npos);
  CHECK(std::filesystem::exists(home.path() / "models" / "ref-identity" /
                                "rdf.yaml"));

  auto info = cli(home, "models info ref-identity");
  CHECK(info.exit_code == 0);
  CHECK(info.out.find("identity pass-through") != std::string::npos);

  CHECK(cli(home, "models download no-such-id 2>/dev/null").exit_code == 1);
}

TEST_CASE("run writes ZRT1 outputs and test-model reports verdicts") {
  TempDir home;
  REQUIRE(cli(home, "models download ref-blur").exit_code == 0);
  const auto model = home.path() / "models" / "ref-blur";
  const auto outdir = home.path() / "out";

  auto r = cli(home, "run " + model.string() + " --input " +
                         (model / "test_input_0.zrt").string() +
                         " --output " + outdir.string() + " --json 2>&1");
  INFO(r.out);
  CHECK(r.exit_code == 0);
  Tensor out = zrt1::read_file(outdir / "blurred.zrt");
  Tensor want = zrt1::read_file(model / "test_output_0.zrt");
  CHECK(out == want);  // byte-identical to the bundled expectation

  auto t = cli(home, "test-model " + model.string());
  CHECK(t.exit_code == 0);
  CHECK(t.out.find("PASS blurred") != std::string::npos);

  // Forced tiling still matches.
  auto rt = cli(home, "run " + model.string() + " --input " +
                          (model / "test_input_0.zrt").string() +
                          " --output " + (home.path() / "out2").string() +
                          " --tile y=8,x=8");
  CHECK(rt.exit_code == 0);
  CHECK(zrt1::read_file(home.path() / "out2" / "blurred.zrt") == want);

  // --no-install with nothing installed fails with the engine exit code.
  TempDir home2;
  REQUIRE(cli(home2, "models download ref-blur").exit_code == 0);
  const auto model2 = home2.path() / "models" / "ref-blur";
  auto ni = cli(home2, "run " + model2.string() + " --input " +
                           (model2 / "test_input_0.zrt").string() +
                           " --output " + (home2.path() / "o").string() +
                           " --no-install 2>/dev/null");
  CHECK(ni.exit_code == 3);
}

TEST_CASE("test-model exit codes distinguish data failures") {
  TempDir home;
  REQUIRE(cli(home, "models download ref-identity").exit_code == 0);
  const auto model = home.path() / "models" / "ref-identity";
  // Corrupt the expected output tensor: checksum verification trips first,
  // which is an integrity failure (exit 4).
  auto bytes = read_file_bytes(model / "test_output_0.zrt");
  bytes.back() ^= std::byte{0xff};
  write_file_bytes(model / "test_output_0.zrt", bytes);
  auto r = cli(home, "test-model " + model.string() + " 2>/dev/null");
  CHECK(r.exit_code == 4);
}
