#pragma once

#include <vector>

#include "nfl/matcore.hpp"
#include "nfl/neural.hpp"

namespace nfl {

/// Quadratic region {z : [z - c; 1]^T [Qz Sz; Sz^T Rz] [z - c; 1] >= 0}.
struct RegionZ {
  Mat Qz;
  Mat Sz;
  Mat Rz;
  Vec center;

  Index dim() const { return Qz.rows(); }
  /// Full (l+1)x(l+1) multiplier [Qz Sz; Sz^T Rz].
  Mat block() const;
  void validate() const;

  /// Ellipsoid {z : (z - c)^T E^{-1} (z - c) <= 1} encoded as Qz = -E^{-1}, Sz = 0, Rz = 1.
  static RegionZ ellipsoid(const Vec& center, const Mat& shape);
  /// Ball of radius r encoded as Qz = -I, Sz = 0, Rz = r^2.
  static RegionZ ball(const Vec& center, double radius);

  /// Same set written in the coordinates z~ = z - origin (center becomes 0).
  /// Throws Error when origin is not strictly inside.
  RegionZ shifted_to(const Vec& origin) const;
};

bool region_contains(const RegionZ& region, const Vec& z);

/// Value of the region's quadratic form at z; nonnegative inside.
double region_margin(const RegionZ& region, const Vec& z);

/// z+ = A0 z + B0 u + Dt (z kron u) + phi(u) + Psi(u) z, Psi(u) = [psi_1(u) ... psi_l(u)].
struct BilinearNfl {
  Mat A0;
  Mat B0;
  Mat Dt;
  Inn phi;
  std::vector<Inn> psi_cols;
  Vec z_star;
  Vec u_star;
  RegionZ region;

  Index l() const { return A0.rows(); }
  Index m() const { return B0.cols(); }
  Index k_phi() const { return phi.state_dim(); }
  Index k_psi() const { return psi_cols.empty() ? 0 : psi_cols.front().state_dim(); }

  /// Shared activation across every network with internal state.
  Activation activation() const;
  /// True when at least one network carries an internal state.
  bool has_nn_channels() const { return k_phi() > 0 || k_psi() > 0; }

  /// Shape, activation, and finiteness checks. Throws ShapeMismatch or MixedActivation.
  void validate() const;

  /// Copy with every network replaced by a zero map (bilinear-only plant).
  BilinearNfl without_networks() const;
};

Vec step_direct(const BilinearNfl& sys, const Vec& z, const Vec& u);

/// Psi(u) assembled column by column from the psi networks.
Mat psi_matrix(const BilinearNfl& sys, const Vec& u);

/// ||step_direct(z*, u*) - z*||_inf
double check_equilibrium(const BilinearNfl& sys);

}  // namespace nfl
