#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nfl/controller.hpp"
#include "nfl/system.hpp"

namespace nfl {

struct Trajectory {
  std::vector<Vec> states;  // z(0..T)
  std::vector<Vec> inputs;  // u(0..T); u(T) is evaluated but not applied
  std::vector<double> lyapunov;
  std::vector<bool> in_region;
  std::vector<int> iterations;

  std::size_t size() const { return states.size(); }
};

/// Raised when the controller fails inside a rollout; `step` is the failing time index.
struct RolloutFailure : NoConvergence {
  RolloutFailure(const std::string& what, int step) : NoConvergence(what), step(step) {}
  int step;
};

struct SimulationSettings {
  int horizon = 200;
  int transient = 5;          // steps skipped by the decay fit
  double converged = 1e-8;    // ||z~||_inf below which V-monotonicity is not checked
  double decrease_slack = 1e-10;
};

/// z(t+1) = step_direct(z(t), evaluate(ctrl, z(t))), V(z) = z~^T P^{-1} z~.
Trajectory rollout(const BilinearNfl& sys, const ImplicitController& ctrl, const Vec& z0, int horizon,
                   const Mat& P);

/// Rollouts from many initial states; each trajectory owns its warm start.
/// Failed rollouts leave an empty trajectory and set failures[i] to the message.
struct BatchResult {
  std::vector<Trajectory> trajectories;
  std::vector<std::string> failures;
};
BatchResult rollout_batch(const BilinearNfl& sys, const ImplicitController& ctrl, const std::vector<Vec>& z0s,
                          int horizon, const Mat& P, bool parallel = true);

/// Baseline: gains synthesized on sys.without_networks(), applied to the full plant.
ImplicitController baseline_controller(const BilinearNfl& sys, const SynthesisResult& baseline);
Trajectory rollout_baseline(const BilinearNfl& sys, const ImplicitController& baseline, const Vec& z0, int horizon,
                            const Mat& P_baseline);

struct RunReport {
  std::vector<int> decrease_violations;  // indices t with V(t+1) > V(t) + slack
  std::vector<int> region_exits;         // indices t outside the region
  int max_iterations = 0;
  double decay_rate = 0.0;               // rho from log ||z~(t)||_2 = c + t log rho
  double peak = 0.0;                     // max_t ||z~(t)||_2
  bool converged = false;                // final ||z~||_inf <= threshold

  bool certified() const { return decrease_violations.empty() && region_exits.empty() && decay_rate < 1.0; }
};

RunReport verify_run(const Trajectory& traj, const RegionZ& region, const Vec& z_star,
                     const SimulationSettings& settings = {});

/// Least-squares rate rho of ||e(t)|| ~ K rho^t over t >= transient while ||e(t)||_inf > floor.
/// Falls back to all non-converged steps when fewer than three remain; returns 0 when the
/// trajectory starts converged.
double fit_decay_rate(const std::vector<Vec>& errors, int transient, double floor);

/// Uniform samples in {z : (z - z*)^T P^{-1} (z - z*) <= scale^2}.
std::vector<Vec> sample_ellipsoid(const Mat& P, const Vec& z_star, int count, unsigned seed, double scale = 1.0);

/// Header t, z0.., u0.., V, in_region, iterations; 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace nfl
