#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "ellpos/experiments.hpp"
#include "ellpos/report.hpp"

namespace {

using nlohmann::ordered_json;

ellpos::ExperimentManifest manifest(const std::string& experiment, ordered_json body, ordered_json params) {
  ellpos::ExperimentManifest m;
  m.experiment = experiment;
  m.body = std::move(body);
  m.params = std::move(params);
  return m;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

TEST(Report, FormatDouble) {
  EXPECT_EQ(ellpos::format_double(0.1), "0.1");
  EXPECT_EQ(ellpos::format_double(1.0 / 0.0), "inf");
  EXPECT_EQ(ellpos::format_double(-1.0 / 0.0), "-inf");
  EXPECT_EQ(std::stod(ellpos::format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Report, ManifestCommentRoundTrip) {
  const ordered_json j{{"experiment", "moments"}, {"params", {{"seed", 3}}}};
  const auto line = ellpos::manifest_comment(j);
  EXPECT_EQ(line.rfind("# manifest=", 0), 0u);
  EXPECT_NE(line.find(" version=" + ellpos::version_string()), std::string::npos);
  EXPECT_EQ(ellpos::parse_manifest_comment(line), j);
  EXPECT_THROW(ellpos::parse_manifest_comment("seed,n"), std::invalid_argument);
}

TEST(Manifest, DefaultsResolvedInCanonicalOrder) {
  const auto m = ellpos::resolve_defaults(manifest("moments", ellpos::to_json(ellpos::BodySpec::cube(4)), {{"p", 2}}));
  std::vector<std::string> keys;
  for (const auto& [k, v] : m.params.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"seed", "samples", "p"}));
  EXPECT_EQ(m.params["p"], 2);
}

TEST(Manifest, InvalidManifestsRejected) {
  const auto cube = ellpos::to_json(ellpos::BodySpec::cube(4));
  EXPECT_THROW(ellpos::resolve_defaults(manifest("moments", cube, {{"bogus", 1}})), std::invalid_argument);
  EXPECT_THROW(ellpos::manifest_from_json(ordered_json{{"experiment", "nope"}}), std::invalid_argument);
  EXPECT_THROW(ellpos::run_experiment(manifest("moments", cube, {{"samples", -5}})), std::invalid_argument);
  EXPECT_THROW(ellpos::run_experiment(manifest("moments", cube, {{"p", 20}})), std::invalid_argument);
}

TEST(Manifest, ReplayIsByteIdentical) {
  const auto m = manifest("moments", ellpos::to_json(ellpos::BodySpec::lp_ball(6, 3.0)), {{"seed", 9}, {"samples", 5000}});
  const auto out = ellpos::run_experiment(m);
  EXPECT_EQ(first_line(out.csv), ellpos::manifest_comment(ellpos::to_json(out.manifest)));
  const std::string path = ::testing::TempDir() + "ellpos_replay.csv";
  {
    std::ofstream f(path);
    f << out.csv;
  }
  const auto loaded = ellpos::load_manifest(path);
  const auto again = ellpos::run_experiment(loaded, {8, ellpos::parallel::Backend::OpenMP});
  EXPECT_EQ(again.csv, out.csv);
  std::remove(path.c_str());
}

TEST(Manifest, WorkerCountNotRecorded) {
  const auto m = manifest("balance", ellpos::to_json(ellpos::BodySpec::cube(3)), {{"samples", 5000}});
  const auto a = ellpos::run_experiment(m, {1, ellpos::parallel::Backend::OpenMP});
  const auto b = ellpos::run_experiment(m, {4, ellpos::parallel::Backend::OpenMP});
  EXPECT_EQ(a.csv, b.csv);
  EXPECT_EQ(a.manifest.params.dump().find("worker"), std::string::npos);
}

TEST(Experiments, EllipseCheckSpots) {
  const auto out = ellpos::run_experiment(manifest("ellipse-check", nullptr, {{"pairs", 3}}));
  EXPECT_EQ(out.csv.rfind("# manifest=", 0), 0u);
  EXPECT_TRUE(out.summary.is_object());
}

TEST(Experiments, BodyTemplates) {
  const auto cube = ellpos::body_for_dim(ordered_json{{"family", "Cube"}}, 7, {1, 0});
  EXPECT_EQ(cube.dim(), 7u);
  const auto cyl = ellpos::body_for_dim(ordered_json{{"family", "CylinderJohn"}, {"m", 5}}, 64, {1, 0});
  EXPECT_EQ(cyl.m(), 5u);
  const auto lp = ellpos::body_for_dim(ordered_json{{"family", "LpBall"}, {"p", 3.0}}, 9, {1, 0});
  EXPECT_EQ(lp.p(), 3.0);
}

}  // namespace
