#pragma once

#include "nfl/lfr.hpp"
#include "nfl/matcore.hpp"
#include "nfl/system.hpp"

namespace nfl {

/// [-2T, (a+b)T; (a+b)T, -2abT] for T = diag(t).
Mat delta_qc_blocks(const Vec& t, double alpha, double beta);

/// Smallest value of [dphi; dx]^T blocks(1) [dphi; dx] over `samples` random pairs in
/// [-range, range], using the activation's declared bounds.
double delta_qc_min_sample(const Activation& act, int samples, unsigned seed, double range = 5.0);

/// [Qz kron L, Sz kron L; Sz^T kron L, Rz kron L].
Mat bilinear_qc_blocks(const RegionZ& region, const Mat& Lambda);

/// Multiplier parameters. T blocks are stored as their diagonals.
struct MultiplierVars {
  Mat Lambda_m;
  Mat Lambda_kpsi;
  Vec T_kphi;
  Vec T_lkpsi;

  void validate(const LfrDims& dims) const;
  /// Elementwise inverse of every block (Lambda^{-1}, T^{-1}).
  MultiplierVars inverted() const;
};

struct CombinedMultiplier {
  Mat Q, S, R;
  Mat Qt, St, Rt;
  Mat SL, SR;

  /// [Q S; S^T R]
  Mat full() const;
  /// [Qt St; St^T Rt]
  Mat full_tilde() const;
};

/// Inverse of the region multiplier [Qz Sz; Sz^T Rz], split into its blocks.
struct RegionInverse {
  Mat Qt, St, Rt;
  /// Qt^{-1} St
  Mat S_hat;
};

RegionInverse invert_region(const RegionZ& region);

/// Q, S, R of the combined uncertainty set, in channel order q = (w_u, w_psi, s_phi, s_psi)
/// and p = (u, s_psi, v_phi, v_psi).
CombinedMultiplier assemble_combined(const MultiplierVars& vars, const RegionZ& region, const LfrDims& dims,
                                     double alpha, double beta);

/// Tilde blocks in closed form from the inverted multipliers. `tilde` holds
/// (Lambda~, T~) = (Lambda^{-1}, T^{-1}). Fills Qt, St, Rt of `out`.
void invert_combined(const MultiplierVars& tilde, const RegionZ& region, const LfrDims& dims, double alpha,
                     double beta, CombinedMultiplier& out);

/// S~ = S_L S_R with S_L carrying the decision variables and S_R constant. Fills SL, SR.
void factor_s_tilde(const MultiplierVars& tilde, const RegionZ& region, const LfrDims& dims, double alpha,
                    double beta, CombinedMultiplier& out);

/// Full construction: forward blocks from `vars`, tilde blocks and factorization from their inverses.
CombinedMultiplier build_multiplier(const MultiplierVars& vars, const RegionZ& region, const LfrDims& dims,
                                    double alpha, double beta);

/// Constant right factor S_R; depends only on the region and slope bounds.
Mat s_right_factor(const RegionZ& region, const LfrDims& dims, double alpha, double beta);

struct NnCoefficients {
  double q;  // 2ab/(a-b)^2
  double s;  // (a+b)/(a-b)^2
  double r;  // 2/(a-b)^2
};

NnCoefficients nn_tilde_coefficients(double alpha, double beta);

}  // namespace nfl
