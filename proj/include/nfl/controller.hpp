#pragma once

#include "nfl/lfr.hpp"
#include "nfl/synthesis.hpp"

namespace nfl {

struct ControllerSettings {
  double tol = 1e-10;
  int max_iter = 10000;
  double damping = 0.5;
  /// Picard is declared stalled when the residual fails to halve over this many iterations.
  int plateau_window = 100;
};

/// Implicit controller in shifted coordinates:
///   u~ = Kz z~ + Ku (z~ kron I_m) u~ + Kw diag_l(z~ kron I_k) s~psi + Kphi s~phi + Kpsi s~psi,
///   s~# = xi(F# s~# + G# u~ + v#*) - xi(v#*).
struct ImplicitController {
  Index l = 0, m = 0, k_phi = 0, k_psi = 0;
  Mat Kz, Ku, Kw, Kphi, Kpsi;
  Mat Fphi, Gphi, Fpsi, Gpsi;
  Activation activation;
  Vec z_star, u_star;
  Vec v_phi_star, v_psi_star;
  Vec s_phi_star, s_psi_star;
  ControllerSettings settings;

  static ImplicitController from(const ShiftedLfr& lfr, const SynthesisResult& res);
  void validate() const;
  Index unknowns() const { return m + k_phi + l * k_psi; }
};

/// Caller-owned warm start, one per trajectory.
struct WarmStart {
  bool valid = false;
  Vec x;  // stacked (u~, s~phi, s~psi)
};

struct ControlOutput {
  Vec u;      // plant coordinates
  Vec s_phi;  // shifted
  Vec s_psi;  // shifted
  int iterations = 0;
  double residual = 0.0;
  bool fallback = false;
};

/// Solves the controller equations at z (plant coordinates). Throws NoConvergence.
ControlOutput evaluate(const ImplicitController& ctrl, const Vec& z, WarmStart* warm = nullptr);

/// Max infinity-norm residual of the three defining equations; u in plant coordinates,
/// s_phi and s_psi shifted.
double residual(const ImplicitController& ctrl, const Vec& z, const Vec& u, const Vec& s_phi, const Vec& s_psi);

}  // namespace nfl
