#include <doctest.h>

#include <complex>
#include <map>
#include <sstream>
#include <string>

#include "nfl/fixtures.hpp"
#include "nfl/simulate.hpp"
#include "support.hpp"

using namespace nfl;

namespace {

struct Designed {
  BilinearNfl sys;
  SynthesisResult res;
  ImplicitController ctrl;
};

Designed design(const BilinearNfl& sys) {
  Designed d;
  d.sys = sys;
  d.res = synthesize(sys);
  d.ctrl = ImplicitController::from(shift_lfr(sys), d.res);
  return d;
}

const Designed& designed(const std::string& name) {
  static std::map<std::string, Designed> cache;
  if (auto it = cache.find(name); it != cache.end()) return it->second;
  for (const auto& p : fixtures::soundness_plants())
    if (p.name == name) return cache.emplace(name, design(p.sys)).first->second;
  FAIL("unknown plant " << name);
  throw Error("unreachable");
}

BilinearNfl scalar_plant(double a, double b, double radius) {
  BilinearNfl s;
  s.A0 = Mat::Constant(1, 1, a);
  s.B0 = Mat::Constant(1, 1, b);
  s.Dt = Mat::Zero(1, 1);
  s.phi = Inn::zero(1, 1);
  s.psi_cols = {Inn::zero(1, 1)};
  s.z_star = Vec::Zero(1);
  s.u_star = Vec::Zero(1);
  s.region = RegionZ::ball(Vec::Zero(1), radius);
  return s;
}

// z+ = 1.5 z + u - 0.9 relu(u): ignoring the network leaves the loop unstable for z < 0.
BilinearNfl network_dominant_plant() {
  BilinearNfl s = scalar_plant(1.5, 1.0, 1.0);
  Mlp net;
  net.activation = Activation::relu();
  net.layers = {{Mat::Ones(1, 1), Vec::Zero(1)}, {Mat::Constant(1, 1, -0.9), Vec::Zero(1)}};
  s.phi = mlp_to_inn(net);
  return s;
}

Trajectory hand_trajectory(const std::vector<double>& zs, const std::vector<double>& vs) {
  Trajectory t;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    t.states.push_back(Vec::Constant(1, zs[i]));
    t.inputs.push_back(Vec::Zero(1));
    t.lyapunov.push_back(vs[i]);
    t.in_region.push_back(true);
    t.iterations.push_back(1);
  }
  return t;
}

}  // namespace

TEST_CASE("starting at the equilibrium stays there") {
  const Designed& d = designed("tanh-shifted");
  const Trajectory t = rollout(d.sys, d.ctrl, d.sys.z_star, 30, d.res.P);
  REQUIRE(t.size() == 31);
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK((t.states[i] - d.sys.z_star).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((t.inputs[i] - d.sys.u_star).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
  const RunReport r = verify_run(t, d.sys.region, d.sys.z_star);
  CHECK(r.converged);
  CHECK(r.decay_rate == 0.0);
}

TEST_CASE("linear loop follows the eigen-decomposition closed form") {
  Mat A(2, 2);
  A << 1.1, 0.4, 0.0, 0.9;
  Mat B(2, 1);
  B << 0, 1;
  BilinearNfl s = fixtures::soundness_plants().front().sys;
  REQUIRE(s.k_phi() == 0);
  REQUIRE(s.Dt.isZero(0.0));
  s.A0 = A;
  s.B0 = B;
  const Designed d = design(s);
  const Mat Acl = A + B * d.res.Kz;
  Eigen::EigenSolver<Mat> es(Acl);
  const Eigen::MatrixXcd V = es.eigenvectors();
  const Eigen::VectorXcd lam = es.eigenvalues();
  const Eigen::MatrixXcd Vinv = V.inverse();
  Vec z0(2);
  z0 << 0.3, -0.2;
  const Trajectory t = rollout(s, d.ctrl, z0, 50, d.res.P);
  for (int k = 0; k <= 50; ++k) {
    Eigen::VectorXcd pow(2);
    for (Index i = 0; i < 2; ++i) pow(i) = std::pow(lam(i), k);
    const Vec ref = (V * pow.asDiagonal() * Vinv * z0.cast<std::complex<double>>()).real();
    CHECK((t.states[static_cast<std::size_t>(k)] - ref).lpNorm<Eigen::Infinity>() <= 1e-8);
  }
}

TEST_CASE("certified rollouts decrease V and stay in the region") {
  for (const std::string name : {"relu-both-channels", "tanh-shifted", "sin-both-channels"}) {
    CAPTURE(name);
    const Designed& d = designed(name);
    const auto z0s = sample_ellipsoid(d.res.P, d.sys.z_star, 100, 11);
    const BatchResult b = rollout_batch(d.sys, d.ctrl, z0s, 200, d.res.P);
    for (std::size_t i = 0; i < z0s.size(); ++i) {
      REQUIRE(b.failures[i].empty());
      const RunReport r = verify_run(b.trajectories[i], d.sys.region, d.sys.z_star);
      CHECK(r.decrease_violations.empty());
      CHECK(r.region_exits.empty());
      CHECK(r.decay_rate < 1.0);
    }
  }
}

TEST_CASE("boundary start decays exponentially") {
  const Designed& d = designed("relu-both-channels");
  const Vec z0 = sample_ellipsoid(d.res.P, d.sys.z_star, 1, 3, 1.0).front();
  const Vec dir = z0 - d.sys.z_star;
  const Vec edge = d.sys.z_star + dir / std::sqrt(dir.dot(d.res.P.llt().solve(dir)));
  const Trajectory t = rollout(d.sys, d.ctrl, edge, 200, d.res.P);
  CHECK(t.lyapunov.front() == doctest::Approx(1.0).epsilon(1e-12));
  const RunReport r = verify_run(t, d.sys.region, d.sys.z_star);
  CHECK(r.certified());
  CHECK(r.decay_rate > 0.0);
  CHECK(r.decay_rate < 1.0);
}

TEST_CASE("decay fit recovers a geometric rate") {
  std::vector<Vec> e;
  for (int t = 0; t < 40; ++t) e.push_back(Vec::Constant(2, 3.0 * std::pow(0.8, t)));
  CHECK(fit_decay_rate(e, 5, 1e-8) == doctest::Approx(0.8).epsilon(1e-12));
  std::vector<Vec> quick = {Vec::Constant(1, 1.0), Vec::Constant(1, 0.1), Vec::Constant(1, 0.01), Vec::Zero(1)};
  CHECK(fit_decay_rate(quick, 5, 1e-8) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(fit_decay_rate({Vec::Zero(1), Vec::Zero(1)}, 5, 1e-8) == 0.0);
}

TEST_CASE("run detectors report indices") {
  const RegionZ ball = RegionZ::ball(Vec::Zero(1), 1.0);
  const Trajectory up = hand_trajectory({0.9, 0.5, 0.4, 0.6, 0.2}, {0.81, 0.25, 0.16, 0.36, 0.04});
  const RunReport r = verify_run(up, ball, Vec::Zero(1));
  CHECK(r.decrease_violations == std::vector<int>{2});
  CHECK(r.region_exits.empty());
  CHECK_FALSE(r.certified());

  const Trajectory out = hand_trajectory({0.5, 0.8, 1.2, 0.7}, {0.25, 0.2, 0.1, 0.05});
  const RunReport o = verify_run(out, ball, Vec::Zero(1));
  CHECK(o.region_exits == std::vector<int>{2});
  CHECK(o.decrease_violations.empty());
  CHECK(o.peak == doctest::Approx(1.2));

  // Increases below the convergence floor are ignored.
  const Trajectory tiny = hand_trajectory({1e-9, 2e-9}, {1e-18, 4e-18});
  CHECK(verify_run(tiny, ball, Vec::Zero(1)).decrease_violations.empty());
}

TEST_CASE("controller failure reports its step") {
  // z+ = 2 z under u~ = z~ + z~ u~, which has no solution once z reaches 1.
  BilinearNfl s = scalar_plant(2.0, 0.0, 10.0);
  ImplicitController c;
  c.l = c.m = 1;
  c.Kz = c.Ku = Mat::Ones(1, 1);
  c.Kw = c.Kphi = c.Kpsi = Mat::Zero(1, 0);
  c.Fphi = c.Fpsi = Mat::Zero(0, 0);
  c.Gphi = c.Gpsi = Mat::Zero(0, 1);
  c.z_star = c.u_star = Vec::Zero(1);
  c.v_phi_star = c.v_psi_star = c.s_phi_star = c.s_psi_star = Vec::Zero(0);
  c.settings.max_iter = 500;
  try {
    (void)rollout(s, c, Vec::Constant(1, 0.25), 10, Mat::Identity(1, 1));
    FAIL("expected a rollout failure");
  } catch (const RolloutFailure& e) {
    CHECK(e.step == 2);
  }
  const BatchResult b = rollout_batch(s, c, {Vec::Constant(1, 0.25), Vec::Constant(1, -0.25)}, 10, Mat::Identity(1, 1));
  CHECK_FALSE(b.failures[0].empty());
  CHECK(b.trajectories[0].size() == 0);
}

TEST_CASE("serial and parallel batches are identical") {
  const Designed& d = designed("sin-both-channels");
  const auto z0s = sample_ellipsoid(d.res.P, d.sys.z_star, 16, 12);
  const BatchResult a = rollout_batch(d.sys, d.ctrl, z0s, 100, d.res.P, false);
  const BatchResult b = rollout_batch(d.sys, d.ctrl, z0s, 100, d.res.P, true);
  for (std::size_t i = 0; i < z0s.size(); ++i) {
    REQUIRE(a.trajectories[i].size() == b.trajectories[i].size());
    for (std::size_t t = 0; t < a.trajectories[i].size(); ++t) {
      CHECK((a.trajectories[i].states[t].array() == b.trajectories[i].states[t].array()).all());
      CHECK(a.trajectories[i].lyapunov[t] == b.trajectories[i].lyapunov[t]);
    }
  }
}

TEST_CASE("baseline coincides with the full design without networks") {
  const Designed& d = designed("bilinear");
  REQUIRE_FALSE(d.sys.has_nn_channels());
  const SynthesisResult base = synthesize(d.sys.without_networks());
  const ImplicitController bc = baseline_controller(d.sys, base);
  for (const Vec& z0 : sample_ellipsoid(d.res.P, d.sys.z_star, 10, 13)) {
    const Trajectory full = rollout(d.sys, d.ctrl, z0, 100, d.res.P);
    const Trajectory baseline = rollout_baseline(d.sys, bc, z0, 100, base.P);
    for (std::size_t t = 0; t < full.size(); ++t)
      CHECK((full.states[t] - baseline.states[t]).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
}

TEST_CASE("baseline leaves the region when the network dominates") {
  const BilinearNfl s = network_dominant_plant();
  const Designed d = design(s);
  const SynthesisResult base = synthesize(s.without_networks());
  const ImplicitController bc = baseline_controller(s, base);
  const Vec dir = Vec::Constant(1, -1.0);
  const Vec z0 = dir / std::sqrt(dir.dot(d.res.P.llt().solve(dir)));
  const RunReport full = verify_run(rollout(s, d.ctrl, z0, 200, d.res.P), s.region, s.z_star);
  CHECK(full.certified());
  const RunReport baseline = verify_run(rollout_baseline(s, bc, z0, 200, base.P), s.region, s.z_star);
  CHECK_FALSE(baseline.region_exits.empty());
}

TEST_CASE("trajectory CSV") {
  const Designed& d = designed("relu-phi");
  const Trajectory t = rollout(d.sys, d.ctrl, sample_ellipsoid(d.res.P, d.sys.z_star, 1, 14).front(), 5, d.res.P);
  std::ostringstream os;
  write_trajectory_csv(os, t);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "t,z0,z1,u0,V,in_region,iterations");
  int rows = 0;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    REQUIRE(cells.size() == 7);
    const auto r = static_cast<std::size_t>(rows);
    CHECK(std::stoi(cells[0]) == rows);
    CHECK(std::stod(cells[1]) == t.states[r](0));
    CHECK(std::stod(cells[3]) == t.inputs[r](0));
    CHECK(std::stod(cells[4]) == t.lyapunov[r]);
    ++rows;
  }
  CHECK(rows == 6);
}

TEST_CASE("ellipsoid samples lie inside") {
  nfl::testing::Rng rng(15);
  const Mat P = rng.spd(3);
  const Vec c = rng.vec(3);
  const auto pts = sample_ellipsoid(P, c, 500, 16, 0.5);
  CHECK(pts.size() == 500);
  for (const Vec& z : pts) CHECK((z - c).dot(P.llt().solve(z - c)) <= 0.25 + 1e-12);
  CHECK(sample_ellipsoid(P, c, 5, 16) == sample_ellipsoid(P, c, 5, 16));
}

TEST_CASE("invalid rollout arguments") {
  const Designed& d = designed("relu-phi");
  CHECK_THROWS_AS(rollout(d.sys, d.ctrl, d.sys.z_star, 0, d.res.P), Error);
  CHECK_THROWS_AS(rollout(d.sys, d.ctrl, Vec::Zero(3), 5, d.res.P), ShapeMismatch);
  CHECK_THROWS_AS(rollout(d.sys, d.ctrl, d.sys.z_star, 5, -d.res.P), Singular);
}
