#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>
#include <unistd.h>

#include "floorline/batch.hpp"
#include "floorline/config.hpp"

using namespace floorline;

namespace {

const fs::path kCli = FLOORLINE_CLI;
const fs::path kSamples = FLOORLINE_SAMPLES;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("floorline_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = kCli.string() + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return read_text(p); }

}  // namespace

TEST(Config, RoundTripsThroughJson) {
  RunConfig c;
  c.houses_path = "h.csv";
  c.bundles_path = "b";
  c.output_path = "o";
  c.pipeline.estimator.sampling = SamplingMode::NearestPixel;
  c.pipeline.estimator.final_subset = FinalSubset::VisibilitySubset;
  c.pipeline.half_window_deg = 30;
  c.pipeline.roadside.offset_px = 12;
  c.match.captured_on_or_after.reset();
  c.visibility_overrides["h7"] = 0.5;
  c.jobs = 3;
  EXPECT_EQ(RunConfig::from_json(c.to_json()), c);
  EXPECT_EQ(RunConfig::from_json(RunConfig{}.to_json()), RunConfig{});
}

TEST(Config, RejectsBadValues) {
  for (const auto& [key, value] : std::vector<std::pair<std::string, nlohmann::json>>{
           {"sampling", "bilinear"}, {"half_window_deg", 0}, {"fence_k", -1}, {"jobs", 0},
           {"visibility_overrides", {{"h1", 0.3}}}, {"captured_on_or_after", "2016-13-01"}}) {
    auto j = RunConfig{}.to_json();
    j[key] = value;
    EXPECT_THROW(RunConfig::from_json(j), Error) << key;
  }
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = scratch(::testing::UnitTest::GetInstance()->current_test_info()->name());
    ASSERT_EQ(run("synth --scene " + (kSamples / "scene_flat.json").string() + " --scene " +
                      (kSamples / "scene_curb.json").string() + " --out " + dir.string() + " --height 512 --depth-height 128",
                  dir / "synth.log"),
              0)
        << slurp(dir / "synth.log");
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

TEST_F(Cli, DecodePrintsSizeAndReencodes) {
  const auto depth = dir / "bundles" / "pano_flat" / "depth.b64";
  ASSERT_EQ(run("decode " + depth.string() + " --reencode " + (dir / "re.b64").string() + " --sidecar " +
                    (dir / "side.json").string(),
                dir / "decode.log"),
            0);
  EXPECT_NE(slurp(dir / "decode.log").find("128x256"), std::string::npos);
  EXPECT_EQ(decode_depthmap(slurp(dir / "re.b64")), decode_depthmap(slurp(depth)));
  EXPECT_TRUE(fs::exists(dir / "side.json"));
}

TEST_F(Cli, DecodeRejectsGarbage) {
  write_text(dir / "bad.b64", "@@@@");
  EXPECT_EQ(run("decode " + (dir / "bad.b64").string(), dir / "log"), 2);
}

TEST_F(Cli, EstimateIsDeterministicAndEvaluates) {
  const std::string common =
      "estimate --houses " + (dir / "houses.csv").string() + " --bundles " + (dir / "bundles").string();
  ASSERT_EQ(run(common + " --output " + (dir / "a").string(), dir / "e1.log"), 0) << slurp(dir / "e1.log");
  ASSERT_EQ(run(common + " --output " + (dir / "b").string() + " --jobs 2", dir / "e2.log"), 0);
  EXPECT_EQ(slurp(dir / "a" / "estimates.csv"), slurp(dir / "b" / "estimates.csv"));
  EXPECT_EQ(slurp(dir / "a" / "funnel.csv"), slurp(dir / "b" / "funnel.csv"));

  const auto rows = load_estimates(dir / "a" / "estimates.csv");
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    ASSERT_TRUE(r.lfe) << r.house_id << " " << r.error;
    EXPECT_TRUE(r.hdsl);
  }

  ASSERT_EQ(run("evaluate --estimates " + (dir / "a" / "estimates.csv").string() + " --houses " +
                    (dir / "houses.csv").string() + " --output " + (dir / "eval").string(),
                dir / "ev.log"),
            0)
      << slurp(dir / "ev.log");
  for (const char* f : {"evaluation.csv", "summary.json", "error_histogram.csv", "error_histogram.svg"})
    EXPECT_TRUE(fs::exists(dir / "eval" / f)) << f;
  const auto summary = nlohmann::json::parse(slurp(dir / "eval" / "summary.json"));
  EXPECT_LT(summary["mae_m"].get<double>(), 0.1);
}

TEST_F(Cli, ConfigFileDrivesEstimate) {
  RunConfig c;
  c.houses_path = (dir / "houses.csv").string();
  c.bundles_path = (dir / "bundles").string();
  c.output_path = (dir / "cfg").string();
  save_config(dir / "run.json", c);
  ASSERT_EQ(run("estimate --config " + (dir / "run.json").string(), dir / "log"), 0) << slurp(dir / "log");
  EXPECT_TRUE(fs::exists(dir / "cfg" / "estimates.csv"));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("", dir / "log"), 1);
  EXPECT_EQ(run("estimate --sampling bilinear --houses x --bundles y --output z", dir / "log"), 1);
  EXPECT_EQ(run("estimate --houses " + (dir / "missing.csv").string() + " --bundles " + (dir / "bundles").string() +
                    " --output " + (dir / "o").string(),
                dir / "log"),
            2);
  // No camera within reach of this house.
  write_text(dir / "far.csv", std::string(kHouseHeader) + "\nfar,,10.0,10.0,1.0,\n");
  EXPECT_EQ(run("estimate --houses " + (dir / "far.csv").string() + " --bundles " + (dir / "bundles").string() +
                    " --output " + (dir / "o").string(),
                dir / "log"),
            3);
  EXPECT_NE(slurp(dir / "o" / "estimates.csv").find("NoMatchingImage"), std::string::npos);
}

TEST(CliFixture, DecodesFortySevenPlaneMap) {
  const auto dir = scratch("fixture");
  const auto fixture = kSamples / "depth_47_planes.b64";
  ASSERT_EQ(run("decode " + fixture.string() + " --reencode " + (dir / "re.b64").string(), dir / "log"), 0);
  EXPECT_EQ(slurp(dir / "log"), "planes=47 256x512\n");
  EXPECT_EQ(slurp(dir / "re.b64"), slurp(fixture));
  auto text = slurp(fixture);
  write_text(dir / "cut.b64", text.substr(0, text.size() / 2));
  EXPECT_NE(run("decode " + (dir / "cut.b64").string(), dir / "log"), 0);
  fs::remove_all(dir);
}
