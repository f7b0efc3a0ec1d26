#include "nfl/simulate.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "nfl/lfr.hpp"

namespace nfl {

Trajectory rollout(const BilinearNfl& sys, const ImplicitController& ctrl, const Vec& z0, int horizon,
                   const Mat& P) {
  if (horizon < 1) throw Error("rollout horizon must be at least 1");
  if (z0.size() != sys.l()) throw ShapeMismatch("rollout: initial state has wrong length");
  const Eigen::LLT<Mat> llt(P);
  if (llt.info() != Eigen::Success) throw Singular("rollout: P is not positive definite");
  Trajectory tr;
  const auto n = static_cast<std::size_t>(horizon) + 1;
  tr.states.reserve(n);
  tr.inputs.reserve(n);
  WarmStart warm;
  Vec z = z0;
  for (int t = 0; t <= horizon; ++t) {
    ControlOutput c;
    try {
      c = evaluate(ctrl, z, &warm);
    } catch (const NoConvergence& e) {
      throw RolloutFailure("step " + std::to_string(t) + ": " + e.what(), t);
    }
    const Vec zt = z - sys.z_star;
    tr.states.push_back(z);
    tr.inputs.push_back(c.u);
    tr.lyapunov.push_back(zt.dot(llt.solve(zt)));
    tr.in_region.push_back(region_contains(sys.region, z));
    tr.iterations.push_back(c.iterations);
    if (t < horizon) z = step_direct(sys, z, c.u);
  }
  return tr;
}

BatchResult rollout_batch(const BilinearNfl& sys, const ImplicitController& ctrl, const std::vector<Vec>& z0s,
                          int horizon, const Mat& P, bool parallel) {
  const auto n = static_cast<std::int64_t>(z0s.size());
  BatchResult out;
  out.trajectories.resize(z0s.size());
  out.failures.resize(z0s.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      out.trajectories[i] = rollout(sys, ctrl, z0s[i], horizon, P);
    } catch (const std::exception& e) {
      out.failures[i] = e.what();
    }
  }
  return out;
}

ImplicitController baseline_controller(const BilinearNfl& sys, const SynthesisResult& baseline) {
  const BilinearNfl stripped = sys.without_networks();
  return ImplicitController::from(shift_lfr(stripped), baseline);
}

Trajectory rollout_baseline(const BilinearNfl& sys, const ImplicitController& baseline, const Vec& z0, int horizon,
                            const Mat& P_baseline) {
  if (baseline.k_phi != 0 || baseline.k_psi != 0) throw Error("baseline controller must not carry network states");
  return rollout(sys, baseline, z0, horizon, P_baseline);
}

double fit_decay_rate(const std::vector<Vec>& errors, int transient, double floor) {
  auto collect = [&](int start) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t t = static_cast<std::size_t>(std::max(start, 0)); t < errors.size(); ++t) {
      if (errors[t].lpNorm<Eigen::Infinity>() <= floor) break;
      pts.emplace_back(static_cast<double>(t), std::log(errors[t].norm()));
    }
    return pts;
  };
  auto pts = collect(transient);
  if (pts.size() < 3) pts = collect(0);
  if (pts.size() < 2) return 0.0;
  double mt = 0.0, my = 0.0;
  for (const auto& [t, y] : pts) {
    mt += t;
    my += y;
  }
  mt /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double stt = 0.0, sty = 0.0;
  for (const auto& [t, y] : pts) {
    stt += (t - mt) * (t - mt);
    sty += (t - mt) * (y - my);
  }
  return std::exp(sty / stt);
}

RunReport verify_run(const Trajectory& traj, const RegionZ& region, const Vec& z_star,
                     const SimulationSettings& settings) {
  RunReport r;
  std::vector<Vec> errors;
  errors.reserve(traj.size());
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const Vec e = traj.states[t] - z_star;
    errors.push_back(e);
    r.peak = std::max(r.peak, e.norm());
    if (!region_contains(region, traj.states[t])) r.region_exits.push_back(static_cast<int>(t));
    if (t < traj.iterations.size()) r.max_iterations = std::max(r.max_iterations, traj.iterations[t]);
    if (t + 1 < traj.size() && e.lpNorm<Eigen::Infinity>() > settings.converged &&
        traj.lyapunov[t + 1] > traj.lyapunov[t] + settings.decrease_slack) {
      r.decrease_violations.push_back(static_cast<int>(t));
    }
  }
  r.decay_rate = fit_decay_rate(errors, settings.transient, settings.converged);
  r.converged = !errors.empty() && errors.back().lpNorm<Eigen::Infinity>() <= settings.converged;
  return r;
}

std::vector<Vec> sample_ellipsoid(const Mat& P, const Vec& z_star, int count, unsigned seed, double scale) {
  const Eigen::LLT<Mat> llt(P);
  if (llt.info() != Eigen::Success) throw Singular("sample_ellipsoid: P is not positive definite");
  const Mat L = llt.matrixL();
  const Index l = P.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Vec d(l);
    for (Index j = 0; j < l; ++j) d(j) = normal(rng);
    d.normalize();
    const double radius = scale * std::pow(unif(rng), 1.0 / static_cast<double>(l));
    out.push_back(z_star + radius * (L * d));
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const Index l = traj.states.empty() ? 0 : traj.states.front().size();
  const Index m = traj.inputs.empty() ? 0 : traj.inputs.front().size();
  os << "t";
  for (Index i = 0; i < l; ++i) os << ",z" << i;
  for (Index i = 0; i < m; ++i) os << ",u" << i;
  os << ",V,in_region,iterations\n";
  os << std::setprecision(17);
  for (std::size_t t = 0; t < traj.size(); ++t) {
    os << t;
    for (Index i = 0; i < l; ++i) os << ',' << traj.states[t](i);
    for (Index i = 0; i < m; ++i) os << ',' << traj.inputs[t](i);
    os << ',' << traj.lyapunov[t] << ',' << (traj.in_region[t] ? 1 : 0) << ',' << traj.iterations[t] << '\n';
  }
}

}  // namespace nfl
