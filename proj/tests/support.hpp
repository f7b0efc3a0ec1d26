#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "nfl/neural.hpp"
#include "nfl/system.hpp"

namespace nfl::testing {

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}

  double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen); }
  Index integer(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(gen); }

  Mat mat(Index r, Index c, double scale = 1.0) {
    Mat m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = scale * uniform();
    return m;
  }
  Vec vec(Index n, double scale = 1.0) { return mat(n, 1, scale).col(0); }
  Mat spd(Index n, double shift = 0.1) {
    const Mat a = mat(n, n);
    return a * a.transpose() + shift * Mat::Identity(n, n);
  }
  Vec unit(Index n) {
    Vec d(n);
    for (Index i = 0; i < n; ++i) d(i) = normal();
    return d.normalized();
  }
};

inline Mlp random_mlp(Rng& rng, Index in, const std::vector<Index>& widths, Index out, const Activation& act,
                      double out_scale = 1.0) {
  Mlp mlp;
  mlp.activation = act;
  Index prev = in;
  for (Index w : widths) {
    mlp.layers.push_back({rng.mat(w, prev), rng.vec(w, 0.5)});
    prev = w;
  }
  mlp.layers.push_back({rng.mat(out, prev, out_scale), rng.vec(out, 0.1)});
  return mlp;
}

/// Hidden widths summing to k, at most three layers.
inline std::vector<Index> split_width(Rng& rng, Index k) {
  std::vector<Index> widths;
  Index left = k;
  while (left > 0) {
    const Index w = widths.size() == 2 ? left : rng.integer(1, left);
    widths.push_back(w);
    left -= w;
  }
  return widths;
}

inline Inn random_network(Rng& rng, Index m, Index l, Index k, const Activation& act, double scale) {
  if (k == 0) {
    Inn inn = Inn::affine(rng.mat(l, m, scale), rng.vec(l, scale), act);
    return inn;
  }
  Inn inn = mlp_to_inn(random_mlp(rng, m, split_width(rng, k), l, act, scale));
  inn.J = rng.mat(l, m, scale);
  return inn;
}

/// Random bilinear plant with arbitrary equilibrium: b_y of phi is adjusted so that (z*, u*) is a fixed point.
inline BilinearNfl random_plant(Rng& rng, Index l, Index m, Index k_phi, Index k_psi, const Activation& act) {
  BilinearNfl s;
  s.A0 = rng.mat(l, l);
  s.B0 = rng.mat(l, m);
  s.Dt = rng.mat(l, l * m, 0.5);
  s.phi = random_network(rng, m, l, k_phi, act, 0.5);
  // Every psi column shares one layer layout so the stacked state is block structured.
  const std::vector<Index> widths = k_psi > 0 ? split_width(rng, k_psi) : std::vector<Index>{};
  for (Index j = 0; j < l; ++j) {
    if (k_psi == 0) {
      s.psi_cols.push_back(Inn::affine(rng.mat(l, m, 0.3), rng.vec(l, 0.3), act));
    } else {
      Inn inn = mlp_to_inn(random_mlp(rng, m, widths, l, act, 0.3));
      inn.J = rng.mat(l, m, 0.3);
      s.psi_cols.push_back(inn);
    }
  }
  s.z_star = rng.vec(l, 0.5);
  s.u_star = rng.vec(m, 0.5);
  s.region = RegionZ::ball(s.z_star, 1.0);
  s.phi.by += s.z_star - step_direct(s, s.z_star, s.u_star);
  return s;
}

}  // namespace nfl::testing
