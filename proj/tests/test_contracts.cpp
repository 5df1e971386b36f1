#include "support.hpp"

#include <gtest/gtest.h>

using namespace stlfunnel;
using namespace stlfunnel::testing;

namespace {

// psi = x, rho_max = 1, constant funnel of width 1: envelope (0, 1).
std::shared_ptr<const TaskEncoding> unit_encoding() {
  auto e = std::make_shared<TaskEncoding>();
  e->phi = TemporalFormula::always({0, 1}, NonTemporalFormula::atom("x", scalar_affine(1, 0)));
  e->rho_max = 1.0;
  e->r = 0.1;
  e->funnel = Funnel(1, 1, 0);
  return e;
}

Contract one_neighbor_contract() {
  const auto e = unit_encoding();
  return {1, {{2, e, 0.0}}, {1, e, 0.0}};
}

RobustnessTrace trace(std::vector<double> v) { return uniform_trace(std::move(v), 0.5); }

// Prefix-scan oracle: delta as the largest grid extension valid for every
// assumption-valid prefix that leaves room for extension.
double scan_delta(const std::vector<bool>& a_ok, const std::vector<bool>& g_ok, double dt) {
  const std::size_t n = a_ok.size();
  double delta = (n - 1) * dt;
  bool any = false;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    bool assumptions = true;
    for (std::size_t s = 0; s <= k; ++s) assumptions = assumptions && a_ok[s];
    if (!assumptions) break;
    any = true;
    std::size_t m = 0;
    while (m < n && g_ok[m]) ++m;  // guarantee holds on samples < m
    if (m <= k) return 0.0;
    delta = std::min(delta, (m - 1 - k) * dt);
  }
  return any ? delta : (n - 1) * dt;
}

}  // namespace

TEST(Contracts, AssembleTwoCycle) {
  Subsystem a;
  a.id = 1;
  a.n = a.m = a.p = 1;
  a.f = [](const Vector& x) -> Vector { return x; };
  a.g = [](const Vector&) -> Matrix { return Matrix::Identity(1, 1); };
  a.h = [](const Vector& w) -> Vector { return w; };
  a.neighbors = {2};
  Subsystem b = a;
  b.id = 2;
  b.neighbors = {1};
  const Network net({a, b});
  const auto e1 = unit_encoding(), e2 = unit_encoding();
  const auto c = assemble_contracts(net, {{1, e1}, {2, e2}});
  EXPECT_EQ(c.at(1).assumptions.size(), 1u);
  EXPECT_EQ(c.at(1).assumptions[0].encoding, c.at(2).guarantee.encoding);
  EXPECT_EQ(c.at(2).assumptions[0].encoding, c.at(1).guarantee.encoding);
  EXPECT_THROW(assemble_contracts(net, {{1, e1}}), Error);
}

TEST(Contracts, AssembleRingsOfTheCaseStudies) {
  const Network rooms = builtin_room_model(6);
  EncodingMap enc;
  for (int i = 1; i <= 6; ++i) enc[i] = unit_encoding();
  const auto c = assemble_contracts(rooms, enc);
  EXPECT_EQ(c.at(1).assumptions[0].subsystem, 6);
  EXPECT_EQ(c.at(1).assumptions[1].subsystem, 2);
  EXPECT_EQ(c.at(6).assumptions[1].subsystem, 1);
  const Network robots = builtin_robot_model();
  const auto r = assemble_contracts(robots, {{1, enc[1]}, {2, enc[2]}, {3, enc[3]}, {4, enc[4]}, {5, enc[5]}});
  for (const auto& [id, ct] : r) {
    ASSERT_EQ(ct.assumptions.size(), 1u);
    EXPECT_EQ(ct.assumptions[0].subsystem, id == 5 ? 1 : id + 1);
  }
}

TEST(Contracts, WeakSatisfaction) {
  const Contract c = one_neighbor_contract();
  // assumptions violated from t = 0: vacuous
  auto r = check_weak(trace({-1, -1, -1}), {trace({-2, 0.5, 0.5})}, c);
  EXPECT_EQ(r.verdict, Verdict::WeakSatisfied);
  // guarantee exits while assumptions hold
  r = check_weak(trace({0.5, 0.5, 1.5, 0.5}), {trace({0.5, 0.5, 0.5, 0.5})}, c);
  EXPECT_EQ(r.verdict, Verdict::Violated);
  EXPECT_EQ(r.which, Party::Guarantee);
  EXPECT_DOUBLE_EQ(*r.violation_time, 1.0);
  EXPECT_EQ(r.margins.size(), 4u);
  EXPECT_DOUBLE_EQ(r.margins[2], -0.5);
  EXPECT_THROW(check_weak(trace({0.5}), {trace({0.5, 0.5})}, c), Error);
  EXPECT_THROW(check_weak(trace({0.5}), {}, c), TopologyError);
}

TEST(Contracts, UniformStrongBoundaryCases) {
  const Contract c = one_neighbor_contract();
  // guarantee throughout, assumptions on a strict prefix: delta = remaining horizon
  auto r = check_uniform_strong(trace({0.5, 0.5, 0.5, 0.5, 0.5}), {trace({0.5, 0.5, -1, -1, -1})}, c);
  EXPECT_EQ(r.verdict, Verdict::UniformStrong);
  EXPECT_DOUBLE_EQ(r.delta, 1.5);
  // guarantee fails exactly where assumptions fail
  r = check_uniform_strong(trace({0.5, 0.5, -1, -1}), {trace({0.5, 0.5, -1, -1})}, c);
  EXPECT_EQ(r.verdict, Verdict::WeakSatisfied);
  EXPECT_DOUBLE_EQ(r.delta, 0.0);
  // everything holds: one grid step
  r = check_uniform_strong(trace({0.5, 0.5, 0.5}), {trace({0.5, 0.5, 0.5})}, c);
  EXPECT_EQ(r.verdict, Verdict::UniformStrong);
  EXPECT_DOUBLE_EQ(r.delta, 0.5);
  // vacuous
  r = check_uniform_strong(trace({-1, -1, -1}), {trace({-1, 0.5, 0.5})}, c);
  EXPECT_EQ(r.verdict, Verdict::UniformStrong);
  // guarantee violated inside an assumption-valid prefix
  r = check_uniform_strong(trace({0.5, -1, 0.5, 0.5}), {trace({0.5, 0.5, 0.5, 0.5})}, c);
  EXPECT_EQ(r.verdict, Verdict::Violated);
}

TEST(Contracts, UniformStrongMatchesPrefixScanAndImpliesWeak) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> len(2, 30), cut(0, 35);
  const Contract c = one_neighbor_contract();
  int strong = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = len(rng), ka = cut(rng), kg = cut(rng);
    std::vector<double> own, nb;
    std::vector<bool> a_ok, g_ok;
    for (int k = 0; k < n; ++k) {
      own.push_back(k < kg ? 0.5 : (k % 2 ? 0.5 : 2.0));
      nb.push_back(k < ka ? 0.5 : (k % 3 ? -1.0 : 0.5));
      a_ok.push_back(nb.back() == 0.5);
      g_ok.push_back(own.back() == 0.5);
    }
    const auto s = check_uniform_strong(trace(own), {trace(nb)}, c);
    const auto w = check_weak(trace(own), {trace(nb)}, c);
    if (s.verdict != Verdict::Violated) {
      EXPECT_DOUBLE_EQ(s.delta, scan_delta(a_ok, g_ok, 0.5));
    }
    if (s.verdict == Verdict::UniformStrong) {
      ++strong;
      EXPECT_NE(w.verdict, Verdict::Violated);
    }
  }
  EXPECT_GT(strong, 20);
}

TEST(Contracts, VacuityNeverBlamesGuarantee) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-3, 3);
  const Contract c = one_neighbor_contract();
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> own(20), nb(20, -5.0);
    for (double& x : own) x = u(rng);
    EXPECT_NE(check_weak(trace(own), {trace(nb)}, c).verdict, Verdict::Violated);
  }
}

TEST(Contracts, EpsilonExpansion) {
  const auto c = one_neighbor_contract();
  EXPECT_DOUBLE_EQ(epsilon_expand(c.guarantee, 0.0).upper(3.0), c.guarantee.upper(3.0));
  EXPECT_DOUBLE_EQ(epsilon_expand(c.guarantee, 0.0).lower(3.0), c.guarantee.lower(3.0));
  EXPECT_DOUBLE_EQ(epsilon_expand(c.guarantee, 0.1).upper(0.0), 1.1);
  EXPECT_DOUBLE_EQ(epsilon_expand(c.guarantee, 0.1).lower(0.0), -0.1);
  EXPECT_THROW(epsilon_expand(c.guarantee, -0.1), Error);

  // neighbour 0.05 above rho_max: passes only against the expanded assumption
  Contract strict = c;
  strict.guarantee.eps = 0.0;
  const auto own = trace({0.5, 0.5, 1.5});
  const auto nb = trace({0.5, 1.05, 1.05});
  EXPECT_EQ(check_weak(own, {nb}, strict).verdict, Verdict::WeakSatisfied);  // vacuous after t = 0.5
  const auto own2 = trace({0.5, 1.5, 0.5});
  EXPECT_EQ(check_weak(own2, {nb}, strict).verdict, Verdict::WeakSatisfied);
  EXPECT_EQ(check_weak(own2, {nb}, epsilon_expand_assumptions(strict, 0.1)).verdict, Verdict::Violated);

  // guarantee expanded: a trace 0.05 above rho_max passes only the expanded contract
  Contract g = c;
  const auto above = trace({1.05, 1.05});
  EXPECT_EQ(check_weak(above, {trace({0.5, 0.5})}, g).verdict, Verdict::Violated);
  g.guarantee = epsilon_expand(g.guarantee, 0.1);
  EXPECT_EQ(check_weak(above, {trace({0.5, 0.5})}, g).verdict, Verdict::WeakSatisfied);
}

TEST(Contracts, EpsilonMonotonicity) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-0.5, 1.5), e(0.0, 0.5);
  const Contract c = one_neighbor_contract();
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> own(15), nb(15);
    for (double& x : own) x = u(rng);
    for (double& x : nb) x = u(rng);
    double e1 = e(rng), e2 = e(rng);
    if (e1 > e2) std::swap(e1, e2);
    // expanding the guarantee can only help
    Contract c1 = c, c2 = c;
    c1.guarantee = epsilon_expand(c.guarantee, e1);
    c2.guarantee = epsilon_expand(c.guarantee, e2);
    if (check_weak(trace(own), {trace(nb)}, c1).verdict != Verdict::Violated) {
      EXPECT_NE(check_weak(trace(own), {trace(nb)}, c2).verdict, Verdict::Violated);
    }
  }
}

TEST(Contracts, Composition) {
  const Network net = builtin_room_model(3);
  EncodingMap enc;
  const auto e = unit_encoding();
  for (int i = 1; i <= 3; ++i) enc[i] = e;
  const auto contracts = assemble_contracts(net, enc);
  std::map<int, Vector> x0 = {{1, Vector::Constant(1, 0.5)}, {2, Vector::Constant(1, 0.5)}, {3, Vector::Constant(1, 0.5)}};
  std::map<int, SatisfactionReport> reps;
  for (int i = 1; i <= 3; ++i) reps[i].verdict = Verdict::UniformStrong;
  EXPECT_TRUE(check_composition(contracts, net, x0, reps).passed());

  auto at_max = x0;
  at_max[2] = Vector::Constant(1, 1.0);
  const auto r = check_composition(contracts, net, at_max, reps);
  EXPECT_FALSE(r.initial_inside);
  EXPECT_TRUE(r.assumptions_covered);

  auto weak = reps;
  weak[3].verdict = Verdict::WeakSatisfied;
  EXPECT_FALSE(check_composition(contracts, net, x0, weak).uniform_strong);

  // an assumption narrower than the neighbour's guarantee
  auto narrowed = contracts;
  auto tight = std::make_shared<TaskEncoding>(*e);
  tight->funnel = Funnel(0.5, 0.5, 0);
  narrowed.at(1).assumptions[0].encoding = tight;
  EXPECT_FALSE(check_composition(narrowed, net, x0, reps).assumptions_covered);
  // a wider, distinct but dominating encoding passes the pointwise check
  auto wide = std::make_shared<TaskEncoding>(*e);
  wide->funnel = Funnel(2, 2, 0);
  narrowed.at(1).assumptions[0].encoding = wide;
  EXPECT_TRUE(check_composition(narrowed, net, x0, reps).assumptions_covered);

  auto missing = contracts;
  missing.erase(2);
  EXPECT_THROW(check_composition(missing, net, x0, reps), TopologyError);
}

// A passing composition check on a closed-loop run implies every guarantee
// envelope holds at every grid time; recomputed here without the checkers.
TEST(Contracts, CompositionImpliesGlobalContainment) {
  json doc = rooms_demo_config(4);
  doc["sim"]["horizon"] = 300.0;
  const ProjectConfig cfg = config_from_json(doc);
  const Network net = build_network(cfg);
  const Vector x0 = initial_state(cfg, net);
  const EncodingMap enc = design(cfg, net, x0);
  const Trajectory traj = simulate(net, make_laws(net, enc), cfg.sim, x0);
  auto trace_of = [&](int id) { return traj.rho_trace(traj.index_of(id)); };
  const VerifyResult v = verify(net, enc, x0, trace_of, cfg.sim.horizon);
  ASSERT_TRUE(v.composition.passed());
  for (std::size_t k = 0; k < traj.ids.size(); ++k) {
    const TaskEncoding& e = *enc.at(traj.ids[k]);
    for (std::size_t s = 0; s < traj.samples(); ++s) {
      const double rho = eval_rho(e.psi(), traj.state(k, s));
      ASSERT_GT(rho, e.rho_max - e.funnel.gamma(traj.times[s]));
      ASSERT_LT(rho, e.rho_max);
    }
  }
}
