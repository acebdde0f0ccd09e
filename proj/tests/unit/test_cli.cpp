#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "faceret/cli.hpp"
#include "faceret/network.hpp"
#include "faceret/synthetic.hpp"

using namespace faceret;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct Workspace {
  fs::path dir = fs::temp_directory_path() / "faceret_test_cli";
  Workspace() {
    fs::remove_all(dir);
    fs::create_directories(dir / "img");
    NetworkSpec spec = vgg_face_spec({32, 16});
    spec.normalization_mean = {100.0f, 100.0f, 100.0f};
    save_weights(dir / "toy.vgfm", spec, random_weights(spec, 21));
    std::string manifest = "[";
    for (int i = 0; i < 4; ++i) {
      const std::string name = "img/f" + std::to_string(i) + ".vgt";
      write_vgt(dir / name, random_tensor(Shape{36, 30, 3}, 100 + i / 2, 40.0f, 100.0f + float(i % 2)));
      manifest += std::string(i ? "," : "") + R"({"path":")" + name + R"(","subject":"s)" + std::to_string(i / 2) + "\"}";
    }
    write(dir / "faces.json", manifest + "]");
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string p(const std::string& rel) const { return (dir / rel).string(); }
};

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"frobnicate"}).code == 1);
  CHECK(run_cli({"evaluate", "--cutoff", "x"}).code == 1);
  CHECK(run_cli({"--help"}).code == 0);
  CHECK(run_cli({"evaluate"}).code == 1);
  CHECK(run_cli({"evaluate", "--manifest", "m.json", "--variant", "36Q"}).code != 0);
}

TEST_CASE("selftest passes and detects an injected fault") {
  const Outcome ok = run_cli({"selftest"});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("FAIL") == std::string::npos);
  CHECK(run_cli({"selftest"}).out == ok.out);
  const Outcome bad = run_cli({"selftest", "--inject-fault", "alpha0"});
  CHECK(bad.code != 0);
  CHECK(bad.out.find("FAIL abrelu-alpha0-collapse") != std::string::npos);
}

TEST_CASE("describe-model prints the layer table") {
  Workspace ws;
  const Outcome r = run_cli({"describe-model", "--model", ws.p("toy.vgfm")});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::vector<std::string> rows;
  for (std::string line; std::getline(lines, line);) rows.push_back(line);
  REQUIRE(rows.size() == 37);
  CHECK(rows[1].find("Image") != std::string::npos);
  CHECK(rows[1].find("32,3") != std::string::npos);
  CHECK(rows.back().find("relu7") != std::string::npos);
  CHECK(rows.back().find("1,256") != std::string::npos);

  write(ws.dir / "corrupt.vgfm", "VGFM\x01");
  CHECK(run_cli({"describe-model", "--model", ws.p("corrupt.vgfm")}).code == 2);
  CHECK(run_cli({"describe-model", "--model", ws.p("absent.vgfm")}).code == 2);
  CHECK(run_cli({"describe-model"}).code == 1);
}

TEST_CASE("extract then evaluate from descriptor files") {
  Workspace ws;
  const Outcome ex = run_cli({"extract", "--model", ws.p("toy.vgfm"), "--manifest", ws.p("faces.json"), "--variant",
                              "35R", "--variant", "35AR", "--variant", "30AR", "--output", ws.p("desc"), "--threads", "2"});
  REQUIRE_MESSAGE(ex.code == 0, ex.err);
  CHECK(ex.err.find("extract:") != std::string::npos);
  CHECK(read_vgt(ws.dir / "desc" / "35R.vgt").shape() == Shape{4, 256});
  CHECK(read_vgt(ws.dir / "desc" / "30AR.vgt").shape() == Shape{4, 128});
  CHECK(slurp(ws.dir / "desc" / "35AR.json").find("\"tap_layer\": 35") != std::string::npos);

  const Outcome ev = run_cli({"evaluate", "--manifest", ws.p("desc/manifest.json"), "--variant", "35R", "--variant",
                              "35AR", "--distance", "chisq", "--distance", "l1", "--cutoff", "1", "--cutoff", "3"});
  REQUIRE_MESSAGE(ev.code == 0, ev.err);
  std::istringstream lines(ev.out);
  std::vector<std::string> rows;
  for (std::string line; std::getline(lines, line);) rows.push_back(line);
  CHECK(rows.size() == 1 + 2 * 2 * 2);
  CHECK(rows[0] == "variant,distance,cutoff,ARP%,ARR%,F%,ANMRR%");
  CHECK(rows[1].rfind("35R,chisq,1,", 0) == 0);

  // A single matrix file takes its variant from the sidecar.
  const Outcome single = run_cli({"evaluate", "--manifest", ws.p("desc/manifest.json"), "--descriptors",
                                  ws.p("desc/35R.vgt"), "--cutoff", "1", "--cutoff", "3", "--distance", "chisq",
                                  "--distance", "l1"});
  REQUIRE(single.code == 0);
  std::string expected;
  for (std::size_t i = 0; i < 5; ++i) {
    if (i == 0 || rows[i].rfind("35R,", 0) == 0) expected += rows[i] + "\n";
  }
  CHECK(single.out == expected);

  // Inline extraction gives the same numbers as the two-step path.
  const Outcome inline_run = run_cli({"evaluate", "--model", ws.p("toy.vgfm"), "--manifest", ws.p("faces.json"),
                                      "--variant", "35R", "--variant", "35AR", "--distance", "chisq", "--distance",
                                      "l1", "--cutoff", "1", "--cutoff", "3", "--threads", "3"});
  REQUIRE(inline_run.code == 0);
  CHECK(inline_run.out == ev.out);

  // Fewer matrix rows than manifest records.
  write(ws.dir / "desc" / "big.json", R"([{"descriptor":0,"subject":"a"},{"descriptor":9,"subject":"a"}])");
  CHECK(run_cli({"evaluate", "--manifest", ws.p("desc/big.json"), "--variant", "35R"}).code == 2);
}

TEST_CASE("json output and output files") {
  Workspace ws;
  REQUIRE(run_cli({"extract", "--model", ws.p("toy.vgfm"), "--manifest", ws.p("faces.json"), "--variant", "33AR",
                   "--output", ws.p("d")})
              .code == 0);
  const Outcome r = run_cli({"evaluate", "--manifest", ws.p("d/manifest.json"), "--variant", "33AR", "--format",
                             "json", "--output", ws.p("report.json")});
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  CHECK(slurp(ws.dir / "report.json").find("\"variant\": \"33AR\"") != std::string::npos);
  CHECK(run_cli({"evaluate", "--manifest", ws.p("d/manifest.json"), "--variant", "33AR", "--format", "xml"}).code == 1);
}

TEST_CASE("config file with flag overrides") {
  Workspace ws;
  REQUIRE(run_cli({"extract", "--model", ws.p("toy.vgfm"), "--manifest", ws.p("faces.json"), "--variant", "35R",
                   "--variant", "35AR2", "--output", ws.p("d")})
              .code == 0);
  write(ws.dir / "exp.json",
        R"({"manifest":"d/manifest.json","variants":["35R"],"distances":["l1"],"cutoffs":[1],"threads":2})");
  const Outcome from_file = run_cli({"evaluate", "--config", ws.p("exp.json")});
  REQUIRE_MESSAGE(from_file.code == 0, from_file.err);
  CHECK(from_file.out.find("35R,l1,1,") != std::string::npos);
  const Outcome overridden = run_cli({"evaluate", "--config", ws.p("exp.json"), "--variant", "35AR2"});
  REQUIRE(overridden.code == 0);
  CHECK(overridden.out.find("35AR2,l1,1,") != std::string::npos);
  CHECK(overridden.out.find("35R,") == std::string::npos);

  write(ws.dir / "typo.json", R"({"manifests":"x"})");
  CHECK(run_cli({"evaluate", "--config", ws.p("typo.json")}).code == 1);
  CHECK(run_cli({"evaluate", "--config", ws.p("nothing.json")}).code == 1);
}

TEST_CASE("extract failures") {
  Workspace ws;
  write(ws.dir / "broken.json", R"([{"path":"img/f0.vgt","subject":"a"},{"path":"img/nope.vgt","subject":"a"},
                                    {"path":"img/f1.vgt","subject":"a"}])");
  const std::vector<std::string> base{"extract", "--model", ws.p("toy.vgfm"), "--manifest", ws.p("broken.json"),
                                      "--variant", "35R", "--output", ws.p("o")};
  CHECK(run_cli(base).code == 2);
  auto skipping = base;
  skipping.push_back("--skip-errors");
  const Outcome r = run_cli(skipping);
  CHECK(r.code == 0);
  CHECK(r.err.find("nope.vgt") != std::string::npos);
  CHECK(read_vgt(ws.dir / "o" / "35R.vgt").shape() == Shape{2, 256});

  write(ws.dir / "empty.json", "[]");
  CHECK(run_cli({"extract", "--model", ws.p("toy.vgfm"), "--manifest", ws.p("empty.json"), "--variant", "35R",
                 "--output", ws.p("o2")})
            .code == 1);
}
