#include "hkin/io.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace hkin;

namespace {

HybridAutomaton microwave() {
  const auto door = ArticulationModel::revolute(Pose(Vec3(0.4, 0.1, 0.0), Quat(0.9, 0.1, 0.3, 0.2)), 0.3,
                                                Quat(Eigen::AngleAxisd(0.4, Vec3::UnitY())));
  GraphEdge e{0, 1, {{0.0, 0.0, ArticulationModel::rigid(forward_kinematics(door, 0.0))}, {0.0, 1.4, door}}, -1.0};
  return build_automaton({{"frame", "door"}, {e}});
}

std::string trace_of(const HybridAutomaton& h, const std::vector<std::vector<double>>& inputs) {
  std::ostringstream out;
  write_trace(out, h, inputs);
  return out.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(ModelJson, RoundTripEveryKind) {
  const std::vector<ArticulationModel> models{
      ArticulationModel::rigid(Pose(Vec3(0.1, 0.2, 0.3), Quat(0.5, 0.5, 0.5, 0.5))),
      ArticulationModel::prismatic(Pose(Vec3(1, 2, 3)), Vec3(0.3, 0.4, 0.0)),
      ArticulationModel::revolute(Pose(Vec3(0, 0, 1), Quat(0.8, 0.0, 0.6, 0.0)), 0.25, Quat::Identity())};
  for (const auto& m : models) {
    const Json j = to_json(m);
    EXPECT_EQ(j["k_q"], m.parameter_count());
    EXPECT_EQ(j.dump(), to_json(model_from_json(j)).dump());
  }
  EXPECT_EQ(to_json(models[0]).begin().key(), "kind");
}

TEST(ModelJson, RevoluteRoundTripIsBitExact) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Quat spin = Quat(n(rng), n(rng), n(rng), n(rng)).normalized() * quat_from_rotation_vector(Vec3(n(rng), n(rng), n(rng)));
    const auto m = ArticulationModel::revolute(Pose(Vec3(n(rng), n(rng), n(rng)), spin), 0.3, spin * spin);
    const std::string first = to_json(m).dump();
    ASSERT_EQ(first, to_json(model_from_json(Json::parse(first))).dump());
  }
}

TEST(ModelJson, RejectsMalformed) {
  Json j = to_json(ArticulationModel::prismatic(Pose{}, Vec3::UnitX()));
  j["k_q"] = 6;
  EXPECT_THROW(model_from_json(j), InputError);
  j = to_json(ArticulationModel::prismatic(Pose{}, Vec3::UnitX()));
  j["theta"]["axis"] = Json::array({1.0, 0.0});
  EXPECT_THROW(model_from_json(j), InputError);
  j["kind"] = "helical";
  EXPECT_THROW(model_from_json(j), InputError);
  EXPECT_THROW(model_from_json(Json::parse("{\"kind\":\"rigid\"}")), InputError);
}

TEST(SegmentationJson, RoundTripAndShape) {
  Segmentation s;
  s.tau = {0, 40, 90};
  s.segments = {{0, 40, ArticulationModel::rigid(Pose{}), 0.01, -12.5},
                {40, 90, ArticulationModel::prismatic(Pose{}, Vec3::UnitZ()), 0.0, 30.25}};
  s.log_map_score = -7.125;
  const Json j = to_json(s);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"tau", "segments", "log_map_score", "schema_version"}));
  EXPECT_EQ(dump(j), dump(to_json(segmentation_from_json(j))));
  Json bad = j;
  bad["tau"] = Json::array({0, 50, 90});
  EXPECT_THROW(segmentation_from_json(bad), InputError);
}

TEST(AutomatonJson, ExactTopLevelKeys) {
  const Json j = to_json(microwave());
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"parts", "edges", "modes", "guards", "init", "schema_version"}));
  EXPECT_EQ(j["schema_version"], 1);
  const Json& e = j["edges"][0];
  std::vector<std::string> edge_keys;
  for (auto it = e.begin(); it != e.end(); ++it) edge_keys.push_back(it.key());
  EXPECT_EQ(edge_keys, (std::vector<std::string>{"i", "j", "models", "config_changepoints"}));
  EXPECT_EQ(j["modes"][1]["offset"][0], 0.05);
}

TEST(AutomatonJson, ByteIdenticalRoundTrip) {
  const std::string first = dump(to_json(microwave()));
  const HybridAutomaton parsed = automaton_from_json(detail::parse_json(first));
  EXPECT_TRUE(validate(parsed).empty());
  EXPECT_EQ(first, dump(to_json(parsed)));
}

TEST(AutomatonJson, RejectsUnknownSchemaAndBadText) {
  Json j = to_json(microwave());
  j["schema_version"] = 2;
  EXPECT_THROW(automaton_from_json(j), InputError);
  EXPECT_THROW(detail::parse_json("{\"parts\": ["), InputError);
}

TEST(TrajectoryCsv, RoundTrip) {
  ScenarioSpec s;
  s.T = 40;
  const auto lt = generate(s);
  std::ostringstream out;
  write_trajectory(out, lt.y, lt.a);
  EXPECT_EQ(lines(out.str()).front(), "t,tx,ty,tz,qw,qx,qy,qz,atx,aty,atz,aqw,aqx,aqy,aqz");
  std::istringstream in(out.str());
  const Trajectory tr = read_trajectory(in);
  ASSERT_EQ(tr.y.size(), lt.y.size());
  ASSERT_EQ(tr.a.size(), lt.a.size());
  for (std::size_t k = 0; k < tr.y.size(); ++k) EXPECT_EQ(tr.y[k].to_array(), lt.y[k].to_array());
  for (std::size_t k = 0; k < tr.a.size(); ++k) EXPECT_EQ(tr.a[k].to_array(), lt.a[k].to_array());
}

TEST(TrajectoryCsv, TruncatedRowNamesLine) {
  std::string text = "t,tx,ty,tz,qw,qx,qy,qz,atx,aty,atz,aqw,aqx,aqy,aqz\n"
                     "0,0,0,0,1,0,0,0,0,0,0,1,0,0,0\n"
                     "1,0,0,0,1,0,0,0,0,0\n";
  std::istringstream in(text);
  try {
    read_trajectory(in);
    FAIL() << "expected an input error";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(TrajectoryCsv, RejectsBadContent) {
  const std::string header = "t,tx,ty,tz,qw,qx,qy,qz,atx,aty,atz,aqw,aqx,aqy,aqz\n";
  const auto fails = [](const std::string& text) {
    std::istringstream in(text);
    EXPECT_THROW(read_trajectory(in), InputError) << text;
  };
  fails("t,x\n0,1\n");
  fails(header + "0,0,0,0,1,0,0,0,0,0,0,1,0,0,0\n");  // one row
  fails(header + "0,0,0,0,2,0,0,0,0,0,0,1,0,0,0\n1,0,0,0,1,0,0,0,0,0,0,1,0,0,0\n");
  fails(header + "0,0,0,0,1,0,0,0,0,0,0,1,0,0,0\n1,0,abc,0,1,0,0,0,0,0,0,1,0,0,0\n");
  fails(header + "0,0,0,0,1,0,0,0,0,0,0,1,0,0,0\n5,0,0,0,1,0,0,0,0,0,0,1,0,0,0\n");
  fails("");
}

TEST(Trace, ZeroInputsConstant) {
  const HybridAutomaton h = microwave();
  const auto rows = lines(trace_of(h, std::vector<std::vector<double>>(5, {0.0})));
  ASSERT_EQ(rows.size(), 6U);
  EXPECT_EQ(rows[0], "t,mode,x,fired");
  for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_EQ(rows[k], std::to_string(k) + ",0,0,-");
}

TEST(Trace, RampThroughLatchChangesModeOnce) {
  const HybridAutomaton h = microwave();
  const auto rows = lines(trace_of(h, std::vector<std::vector<double>>(40, {0.01})));
  int changes = 0;
  std::string prev = "0";
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto cells = detail::split(rows[k], ',');
    if (std::string(cells[1]) != prev) ++changes;
    prev = std::string(cells[1]);
  }
  EXPECT_EQ(changes, 1);
  EXPECT_EQ(prev, "1");
}

TEST(Trace, ClampingBelowZero) {
  const HybridAutomaton h = microwave();
  const auto rows = lines(trace_of(h, std::vector<std::vector<double>>(3, {-0.02})));
  const std::string clamp = std::to_string(h.guard_id(0, 0, GuardKind::ClampLow));
  for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_EQ(rows[k], std::to_string(k) + ",0,0," + clamp);
}

TEST(Inputs, HeaderFollowsCoordinates) {
  std::istringstream ok("t,u0\n0,0.1\n1,-0.2\n");
  const auto u = read_inputs(ok, 1);
  ASSERT_EQ(u.size(), 2U);
  EXPECT_EQ(u[1][0], -0.2);
  std::istringstream wrong("t,u0,u1\n0,0.1,0.2\n");
  EXPECT_THROW(read_inputs(wrong, 1), InputError);
}

TEST(LabelsJson, Shape) {
  ScenarioSpec s;
  s.object = ObjectKind::Microwave;
  s.T = 60;
  const Json j = to_json(s, generate(s));
  EXPECT_EQ(j["object"], "microwave");
  EXPECT_EQ(j["tau"].size(), 3U);
  EXPECT_EQ(j["segments"][1]["model"]["kind"], "revolute");
  EXPECT_EQ(j["schema_version"], 1);
}
