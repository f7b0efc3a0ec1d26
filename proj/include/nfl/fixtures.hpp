#pragma once

#include <string>
#include <vector>

#include "nfl/neural.hpp"
#include "nfl/system.hpp"

namespace nfl::fixtures {

/// Exact ReLU interpolants of (e^{u1} - 1, u2^3 / (1 + u2^2)) with hidden sizes [10, 10].
/// Output is zero at the origin.
Mlp four_dim_network();

/// Four-state, two-input bilinear plant with the network above entering through
/// the input-dependent state matrix. Ball region of radius 0.08 around the origin.
BilinearNfl four_dim_system();

/// A0 = diag(2, 0.5), B0 = [0; 1]: the unstable mode is uncontrollable.
BilinearNfl unstabilizable_system();

struct NamedPlant {
  std::string name;
  BilinearNfl sys;
};

/// Small plants covering linear, bilinear-only, both network channels,
/// ReLU, tanh, and a sector activation with alpha < 0.
std::vector<NamedPlant> soundness_plants();

/// Copy of `inn` with its output mapped through C (y -> C y).
Inn map_output(const Inn& inn, const Mat& C);

}  // namespace nfl::fixtures
