// Copyright 2026 The ASN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "cli.hpp"

using namespace asn;
namespace fs = std::filesystem;

namespace {

struct RunCli {
  int code;
  std::string out;
  std::string err;
};

RunCli run(std::vector<std::string> args) {
  args.insert(args.begin(), "asn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("asn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    SceneSpec spec;
    spec.kind = SceneKind::kCorner;
    spec.width = 24;
    spec.height = 20;
    spec.intrinsics = centered_intrinsics(24, 20, 22.0);
    scene_ = gen_scene(spec);
    write_file(path("d.pfm"), write_pfm(depth_to_pfm(scene_.depth)));
    write_file(path("gt_n.pfm"), write_pfm(vectors_to_pfm(scene_.normals)));
    write_file(path("k.json"), write_intrinsics(spec.intrinsics));
    write_file(path("c.pfm"), write_context(*scene_.context));
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
  Scene scene_;
};

}  // namespace

TEST_F(CliTest, NormalsWritesThreeChannelPfm) {
  const RunCli r = run({"normals", "--method", "asn", "--depth", path("d.pfm"), "--intrinsics", path("k.json"),
                     "--context", path("c.pfm"), "--out", path("n.pfm")});
  ASSERT_EQ(r.code, 0) << r.err;
  const PfmImage img = read_pfm(read_file(path("n.pfm")));
  EXPECT_EQ(img.channels, 3);
  EXPECT_EQ(img.width, 24);
  const NormalMap n = pfm_to_normals(img);
  EXPECT_LT(normal_metrics(n, scene_.normals).mean_deg, 1.0);
}

TEST_F(CliTest, EveryMethodRuns) {
  for (const char* m : {"asn", "sobel", "lsq", "average"}) {
    const RunCli r = run({"normals", "--method", m, "--depth", path("d.pfm"), "--intrinsics", path("k.json"),
                       "--out", path(std::string(m) + ".pfm")});
    EXPECT_EQ(r.code, 0) << m << r.err;
  }
}

TEST_F(CliTest, MissingRequiredFlagIsUsageError) {
  const RunCli r = run({"normals", "--method", "lsq", "--intrinsics", path("k.json"), "--out", path("n.pfm")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--depth"), std::string::npos);
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, UnknownSubcommandAndFlag) {
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"normals", "--bogus"}).code, 1);
  EXPECT_EQ(run({"normals", "--method", "pca", "--depth", path("d.pfm"), "--intrinsics", path("k.json")}).code, 1);
  EXPECT_EQ(run({}).code, 1);
}

TEST_F(CliTest, MissingInputIsIoError) {
  const RunCli r = run({"unproject", "--depth", path("nope.pfm"), "--intrinsics", path("k.json"), "--out",
                     path("p.pfm")});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, BadIntrinsicsIsValidationError) {
  write_file(path("bad.json"), "{fx: -1, fy: 1, cx: 0, cy: 0}");
  const RunCli r = run({"unproject", "--depth", path("d.pfm"), "--intrinsics", path("bad.json"), "--out",
                     path("p.pfm")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("fx must be positive"), std::string::npos);
}

TEST_F(CliTest, UnprojectMatchesLibrary) {
  ASSERT_EQ(run({"unproject", "--depth", path("d.pfm"), "--intrinsics", path("k.json"), "--out", path("p.pfm")})
                .code,
            0);
  const auto pts = pfm_to_vectors(read_pfm(read_file(path("p.pfm"))));
  const DepthMap d = pfm_to_depth(read_pfm(read_file(path("d.pfm"))));
  const PointMap ref = unproject(d, read_intrinsics(read_file(path("k.json"))));
  EXPECT_TRUE(pts == pfm_to_vectors(vectors_to_pfm(ref)));
}

TEST_F(CliTest, MetricsJsonAndCsv) {
  RunCli r = run({"metrics", "--pred-depth", path("d.pfm"), "--gt-depth", path("d.pfm"), "--pred-normals",
               path("gt_n.pfm"), "--gt-normals", path("gt_n.pfm"), "--intrinsics", path("k.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["depth"]["rel"].get<double>(), 0.0);
  EXPECT_EQ(j["normal"]["pct_30"].get<double>(), 1.0);
  EXPECT_EQ(j["pointcloud"]["dist"].get<double>(), 0.0);
  r = run({"metrics", "--pred-depth", path("d.pfm"), "--gt-depth", path("d.pfm"), "--format", "csv"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, 21), "section,metric,value\n");
  EXPECT_EQ(run({"metrics", "--pred-depth", path("d.pfm")}).code, 1);
}

TEST_F(CliTest, GuidanceThenSample) {
  // One-hot contexts have constant L1 intensity; use the surface id instead.
  ContextMap ids(24, 20, 1);
  int step = -1;
  for (int v = 0; v < 20; ++v)
    for (int u = 0; u < 24; ++u) {
      ids.feature(u, v)[0] = scene_.labels.at(u, v);
      if (v == 0 && u > 0 && scene_.labels.at(u, 0) != scene_.labels.at(u - 1, 0)) step = u;
    }
  ASSERT_GT(step, 0);
  write_file(path("ids.pfm"), write_context(ids));
  ASSERT_EQ(run({"guidance", "--order", "1", "--context", path("ids.pfm"), "--out", path("g.pfm")}).code, 0);
  const ScalarMap g = pfm_to_scalar(read_pfm(read_file(path("g.pfm"))));
  EXPECT_EQ(*std::max_element(g.values().begin(), g.values().end()), 1.0);
  const RunCli r = run({"sample", "--ratio", "0.08", "--guidance", path("g.pfm")});
  ASSERT_EQ(r.code, 0);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "rank,u,v");
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    const int u = std::stoi(line.substr(line.find(',') + 1));
    EXPECT_TRUE(u == step - 1 || u == step) << line;
  }
  EXPECT_EQ(rows, 38);  // round(0.08 * 480), within the 40 step pixels
  EXPECT_EQ(run({"guidance", "--order", "3", "--context", path("c.pfm"), "--out", path("g.pfm")}).code, 1);
}

TEST_F(CliTest, LossTerms) {
  RunCli r = run({"loss", "--term", "total", "--ld", "1", "--lasn", "0.1", "--ln", "0.2"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(std::stod(r.out), 2.5);
  r = run({"loss", "--term", "silog", "--pred-depth", path("d.pfm"), "--gt-depth", path("d.pfm")});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(std::stod(r.out), 0.0);
  r = run({"loss", "--term", "asn", "--depth", path("d.pfm"), "--gt-normals", path("gt_n.pfm"), "--intrinsics",
           path("k.json"), "--context", path("c.pfm")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(std::stod(r.out), 1e-3);
  r = run({"loss", "--term", "vn", "--pred-depth", path("d.pfm"), "--gt-depth", path("d.pfm"), "--intrinsics",
           path("k.json")});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(std::stod(r.out), 0.0);
  ASSERT_EQ(run({"guidance", "--context", path("c.pfm"), "--out", path("g.pfm")}).code, 0);
  r = run({"loss", "--term", "normal", "--pred-normals", path("gt_n.pfm"), "--gt-normals", path("gt_n.pfm"),
           "--guidance", path("g.pfm")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::stod(r.out), 0.0);
  r = run({"loss", "--term", "silog", "--pred-depth", path("d.pfm")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--gt-depth"), std::string::npos);
}

TEST_F(CliTest, GradcheckPasses) {
  const RunCli r = run({"gradcheck", "--target", "depth", "--instances", "2"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "instance,max_rel_error");
}

TEST_F(CliTest, ExperimentsAreByteIdentical) {
  const std::vector<std::vector<std::string>> cmds{
      {"experiment", "noise", "--sigmas", "0", "0.01", "--seeds", "1", "2", "3", "--seed", "42"},
      {"experiment", "triplets", "--ks", "10", "40", "--scene", "corner"},
      {"experiment", "patch", "--sizes", "3", "5"},
      {"experiment", "window", "--width", "1280", "--height", "960", "--ratio", "8e-5"},
      {"experiment", "fit-context", "--steps", "3"}};
  for (const auto& c : cmds) {
    const RunCli a = run(c);
    const RunCli b = run(c);
    ASSERT_EQ(a.code, 0) << c[1] << a.err;
    EXPECT_EQ(a.out, b.out) << c[1];
    EXPECT_FALSE(a.out.empty());
  }
  EXPECT_EQ(run(cmds[3]).out, "9\n");
}

TEST_F(CliTest, ExperimentOutputToFileAndTiming) {
  ASSERT_EQ(run({"experiment", "patch", "--sizes", "3", "5", "--timing", "--out", path("p.csv")}).code, 0);
  const std::string csv = read_file(path("p.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "patch,method,mean_deg,median_deg,pct_11_25,pct_22_5,pct_30,count,ms");
  ASSERT_EQ(run({"experiment", "fit-context", "--steps", "2", "--context-out", path("ctx.pfm")}).code, 0);
  EXPECT_EQ(read_context(read_file(path("ctx.pfm"))).channels(), 3);
}

TEST_F(CliTest, GlobalFlagsAfterSubcommand) {
  const RunCli a = run({"experiment", "patch", "--sizes", "3", "--seed", "7"});
  const RunCli b = run({"--seed", "7", "experiment", "patch", "--sizes", "3"});
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(run({"experiment", "patch", "--patch", "4"}).code, 1);
}
