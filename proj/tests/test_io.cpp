#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace stlfunnel;
using namespace stlfunnel::testing;

namespace {

Trajectory small_trajectory() {
  const Network net = builtin_room_model(3);
  const PredicateEnv env = {{"le25", scalar_affine(-1, 25)}, {"ge21", scalar_affine(1, -21)}};
  const auto phi = parse_formula("F[0,100]G[20,100] (le25 & ge21)", env);
  EncodingMap enc;
  const Vector x0 = net.initial_state();
  for (std::size_t k = 0; k < 3; ++k) {
    SelectionPolicy p;
    p.t_star_fraction = 0.0;
    const double rho0 = eval_rho(phi.psi, net.state_of(x0, k));
    enc[net.subsystems()[k].id] = std::make_shared<const TaskEncoding>(design_parameters(phi, rho0, 2.0, p));
  }
  SimConfig cfg;
  cfg.dt = 0.1;
  cfg.horizon = 5;
  cfg.substeps = 4;
  return simulate(net, make_laws(net, enc), cfg, x0);
}

}  // namespace

TEST(Io, PredicateRoundTrip) {
  const Predicate ps[] = {Predicate::affine(Vector::Constant(2, 0.3), -1.25, {0, 2}),
                          Predicate::ball((Vector(2) << 0.7, 0.6).finished(), 0.05, {0, 1}),
                          scalar_affine(1e-17, 3.0)};
  for (const auto& p : ps) {
    const Predicate q = predicate_from_json(json::parse(predicate_to_json(p).dump()));
    EXPECT_EQ(q, p);
  }
  const json defaulted = {{"type", "ball"}, {"center", {1.0, 2.0, 3.0}}, {"radius", 1.0}};
  EXPECT_EQ(predicate_from_json(defaulted).selector(), (std::vector<int>{0, 1, 2}));
  EXPECT_THROW(predicate_from_json(json{{"type", "cone"}}), Error);
  EXPECT_THROW(predicate_from_json(json{{"type", "ball"}, {"center", {1.0}}}), Error);
  EXPECT_THROW(predicate_from_json(json{{"type", "ball"}, {"center", {1.0}}, {"radius", -1.0}}), Error);
}

TEST(Io, PolicyPartialOverride) {
  SelectionPolicy p = policy_from_json(json{{"t_star_fraction", 0.25}});
  EXPECT_DOUBLE_EQ(p.t_star_fraction, 0.25);
  EXPECT_DOUBLE_EQ(p.rho_max_fraction, SelectionPolicy{}.rho_max_fraction);
  EXPECT_EQ(policy_from_json(policy_to_json(p)).t_star_fraction, 0.25);
  EXPECT_THROW(policy_from_json(json{{"tstar", 0.5}}), Error);
  EXPECT_THROW(policy_from_json(json{{"rho_max_fraction", 1.5}}), Error);
}

TEST(Io, EncodingRoundTripIsExact) {
  const auto traj = small_trajectory();
  EncodingMap enc;
  for (std::size_t k = 0; k < traj.ids.size(); ++k) enc[traj.ids[k]] = traj.encodings[k];
  const std::string text = encodings_to_json(enc).dump(2);
  const EncodingMap back = encodings_from_json(json::parse(text));
  ASSERT_EQ(back.size(), enc.size());
  for (const auto& [id, e] : enc) EXPECT_EQ(*back.at(id), *e) << "subsystem " << id;
  // rooms 1 and 3 start equal and share one group
  EXPECT_EQ(back.at(1), back.at(3));
  EXPECT_NE(back.at(1), back.at(2));
  EXPECT_EQ(encodings_to_json(back).dump(2), text);
}

TEST(Io, EncodingsRejectDuplicatesAndBadValues) {
  const auto traj = small_trajectory();
  json j = encodings_to_json({{1, traj.encodings[0]}});
  j["encodings"].push_back(j["encodings"][0]);
  EXPECT_THROW(encodings_from_json(j), Error);
  json bad = encoding_to_json(*traj.encodings[0]);
  bad["r"] = bad["rho_max"].get<double>() * 2;
  EXPECT_THROW(encoding_from_json(bad), Error);
  bad = encoding_to_json(*traj.encodings[0]);
  bad.erase("funnel");
  EXPECT_THROW(encoding_from_json(bad), Error);
}

TEST(Io, CsvRoundTripKeepsEveryBit) {
  const auto traj = small_trajectory();
  std::ostringstream os;
  write_trajectory_csv(os, traj);
  std::istringstream is(os.str());
  const CsvTable tab = read_csv(is);
  ASSERT_EQ(tab.rows(), traj.samples());
  EXPECT_EQ(tab.ids(), traj.ids);
  EXPECT_EQ(tab.state_dim(2), 1);
  for (std::size_t k = 0; k < traj.ids.size(); ++k) {
    const std::string s = std::to_string(traj.ids[k]);
    EXPECT_EQ(tab.column(s + ".rho"), traj.rho[k]);
    EXPECT_EQ(tab.column(s + ".x1"), traj.states[k]);
    EXPECT_EQ(tab.column(s + ".u1"), traj.inputs[k]);
  }
  EXPECT_EQ(tab.times(), traj.times);
  EXPECT_EQ(os.str().find('\r'), std::string::npos);
}

TEST(Io, CsvStride) {
  const auto traj = small_trajectory();
  std::ostringstream os;
  write_trajectory_csv(os, traj, 7);
  std::istringstream is(os.str());
  const CsvTable tab = read_csv(is);
  EXPECT_EQ(tab.rows(), (traj.samples() + 6) / 7);
  EXPECT_EQ(tab.times()[1], traj.times[7]);
  EXPECT_THROW(write_trajectory_csv(os, traj, 0), Error);
}

TEST(Io, MalformedCsv) {
  auto parse = [](const std::string& s) {
    std::istringstream is(s);
    return read_csv(is);
  };
  EXPECT_THROW(parse("x,1.rho\n0,1\n"), Error);
  EXPECT_THROW(parse("t,1.rho\n0,1,2\n"), Error);
  EXPECT_THROW(parse("t,1.rho\n0\n"), Error);
  EXPECT_THROW(parse("t,1.rho\n0,abc\n"), Error);
  EXPECT_THROW(parse("t,1.rho\n0;1\n"), Error);
  EXPECT_EQ(parse("").rows(), 0u);
  const auto tab = parse("t,1.rho\r\n0,1\r\n0.5,2\r\n");
  EXPECT_EQ(tab.rows(), 2u);
  EXPECT_THROW(tab.column("2.rho"), Error);
}

TEST(Io, SvgHandlesEmptyAndLargeSeries) {
  PlotSpec empty;
  std::ostringstream a;
  EXPECT_FALSE(write_svg(a, empty));
  EXPECT_NE(a.str().find("no data"), std::string::npos);

  std::vector<double> t(100000), y(100000);
  for (std::size_t k = 0; k < t.size(); ++k) {
    t[k] = static_cast<double>(k);
    y[k] = k == 51234 ? 50.0 : 0.0;
  }
  const auto idx = detail::decimate(y, 2000);
  EXPECT_LE(idx.size(), 2002u);
  EXPECT_NE(std::find(idx.begin(), idx.end(), 51234u), idx.end());
  std::ostringstream b;
  EXPECT_TRUE(write_svg(b, funnel_plot("x < y & z", t, y, y, y)));
  EXPECT_NE(b.str().find("x &lt; y &amp; z"), std::string::npos);
}
