#pragma once

#include <array>
#include <vector>

#include "nfl/matcore.hpp"
#include "nfl/neural.hpp"
#include "nfl/system.hpp"

namespace nfl {

/// Channel bookkeeping. Uncertainty inputs q = (w_u, w_psi, s_phi, s_psi),
/// uncertainty outputs p = (u, s_psi, v_phi, v_psi).
struct LfrDims {
  Index l = 0;
  Index m = 0;
  Index k_phi = 0;
  Index k_psi = 0;

  Index mc() const { return l * m + l * l * k_psi + l * k_psi + k_phi; }
  Index nc() const { return 2 * l * k_psi + m + k_phi; }
  /// Sizes of the q blocks (w_u, w_psi, s_phi, s_psi).
  std::array<Index, 4> q_sizes() const { return {l * m, l * l * k_psi, k_phi, l * k_psi}; }
  /// Sizes of the p blocks (u, s_psi, v_phi, v_psi).
  std::array<Index, 4> p_sizes() const { return {m, l * k_psi, k_phi, l * k_psi}; }
};

struct StackedPsi {
  Mat F;   // l k x l k, block diagonal
  Mat G;   // l k x m
  Mat H;   // l x l^2 k
  Mat J;   // l x l m
  Mat By;  // l x l, column i = b_y of psi_i
  Vec bx;  // l k
  /// Block-diagonal network carrying all psi states, usable with solve_implicit_state.
  Inn net;
};

StackedPsi stack_psi(const std::vector<Inn>& psi_cols);

/// (z kron I_m) u for every column block: returns z kron u.
Vec kron_vec(const Vec& z, const Vec& u);

/// diag_l(z kron I_k) s for s = vec(s_1, ..., s_l).
Vec bilinear_psi_signal(const Vec& z, const Vec& s_psi, Index k);

/// Unshifted LFR with bias. Rows: (z+, u, s_psi, v_phi, v_psi);
/// columns: (z, u, w_u, w_psi, s_phi, s_psi).
struct Lfr {
  LfrDims dims;
  Mat M;
  Vec bias;
  Inn phi_net;
  Inn psi_net;
};

Lfr build_lfr(const BilinearNfl& sys);

/// Closes the unshifted LFR loop for one step and returns z+.
Vec close_lfr_step(const Lfr& lfr, const Vec& z, const Vec& u);

/// Equilibrium-shifted LFR in the variables z~ = z - z*, u~ = u - u*.
struct ShiftedLfr {
  LfrDims dims;
  Activation activation;

  Mat calA;      // l x l
  Mat calB;      // l x m
  Mat DJ;        // l x lm, D~ + J_psi
  Mat Hpsi;      // l x l^2 k_psi
  Mat Hphi;      // l x k_phi
  Mat Hpsi_star; // l x l k_psi
  Mat Gphi, Fphi;
  Mat Gpsi, Fpsi;

  Mat Astar_u;
  Mat Astar_spsi;
  Mat By_psi;

  Vec z_star, u_star;
  Vec s_phi_star, s_psi_star;
  Vec v_phi_star, v_psi_star;

  Inn phi_net;
  Inn psi_net;

  /// [DJ | Hpsi | Hphi | Hpsi_star], the map from q into z+.
  Mat Bq() const;
  /// Map from u~ into p: vec[I; 0; Gphi; Gpsi].
  Mat Dpu() const;
  /// Map from q into p.
  Mat Dpq() const;
};

ShiftedLfr shift_lfr(const BilinearNfl& sys);

/// Shifted network state s~ solving s~ = xi(F s~ + G u~ + v*) - xi(v*). `net`
/// supplies the activation and block structure.
Vec shifted_state(const Inn& net, const Mat& F, const Mat& G, const Vec& v_star, const Vec& s_star,
                  const Vec& u_tilde);

/// One step of the shifted LFR with its feedback closed; returns z~+.
Vec shifted_step(const ShiftedLfr& lfr, const Vec& z_tilde, const Vec& u_tilde);

}  // namespace nfl
