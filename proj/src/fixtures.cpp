#include "nfl/fixtures.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace nfl::fixtures {

namespace {

Mat rows(std::initializer_list<std::initializer_list<double>> r) {
  Mat m(static_cast<Index>(r.size()), static_cast<Index>(r.begin()->size()));
  Index i = 0;
  for (const auto& row : r) {
    Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

// Uniform in [-1, 1) from raw mt19937_64 bits, identical on every platform.
struct Uniform {
  std::mt19937_64 rng;
  explicit Uniform(std::uint64_t seed) : rng(seed) {}
  double operator()() { return static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0; }
  Mat mat(Index r, Index c, double scale) {
    Mat m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = scale * (*this)();
    return m;
  }
};

Mlp random_mlp(Uniform& u, Index in, const std::vector<Index>& widths, Index out, double out_scale, Activation act) {
  Mlp mlp;
  mlp.activation = std::move(act);
  Index prev = in;
  for (Index w : widths) {
    mlp.layers.push_back({u.mat(w, prev, 1.0), u.mat(w, 1, 0.5).col(0)});
    prev = w;
  }
  mlp.layers.push_back({u.mat(out, prev, out_scale), Vec::Zero(out)});
  return mlp;
}

// Shifts b_y so that the network output at u equals y.
Inn pin_output(Inn inn, const Vec& u, const Vec& y) {
  inn.by += y - evaluate_inn(inn, u).y;
  return inn;
}

BilinearNfl empty_plant(const Mat& A0, const Mat& B0, double radius) {
  BilinearNfl s;
  s.A0 = A0;
  s.B0 = B0;
  const Index l = A0.rows(), m = B0.cols();
  s.Dt = Mat::Zero(l, l * m);
  s.phi = Inn::zero(m, l);
  s.psi_cols.assign(static_cast<std::size_t>(l), Inn::zero(m, l));
  s.z_star = Vec::Zero(l);
  s.u_star = Vec::Zero(m);
  s.region = RegionZ::ball(Vec::Zero(l), radius);
  return s;
}

// Networks with a shared activation on both channels; phi is pinned so that
// (z*, u*) is an equilibrium.
BilinearNfl with_networks(BilinearNfl s, std::uint64_t seed, const Activation& act, Index hidden, double phi_scale,
                          double psi_scale, bool use_phi, bool use_psi) {
  Uniform u(seed);
  const Index l = s.l(), m = s.m();
  if (use_psi) {
    for (Index j = 0; j < l; ++j) {
      Inn inn = mlp_to_inn(random_mlp(u, m, {hidden}, l, psi_scale, act));
      s.psi_cols[static_cast<std::size_t>(j)] = pin_output(inn, Vec::Zero(m), Vec::Zero(l));
    }
  }
  if (use_phi) s.phi = mlp_to_inn(random_mlp(u, m, {hidden, hidden}, l, phi_scale, act));
  Vec zu(l * m);
  for (Index i = 0; i < l; ++i) zu.segment(i * m, m) = s.z_star(i) * s.u_star;
  const Vec rest = s.A0 * s.z_star + s.B0 * s.u_star + s.Dt * zu + psi_matrix(s, s.u_star) * s.z_star;
  s.phi = pin_output(s.phi, s.u_star, s.z_star - rest);
  return s;
}

}  // namespace

Inn map_output(const Inn& inn, const Mat& C) {
  Inn out = inn;
  out.H = C * inn.H;
  out.J = C * inn.J;
  out.by = C * inn.by;
  return out;
}

Mlp four_dim_network() {
  const double h = 0.5;
  const double a = (std::exp(0.5) - 1.0) / h;
  const double c = (std::exp(1.0) - std::exp(0.5)) / h - a;
  const double b = (1.0 - std::exp(-0.5)) / h;
  const double d = (std::exp(-0.5) - std::exp(-1.0)) / h - b;
  const double f = (std::exp(-1.0) - std::exp(-1.5)) / h - (b + d);
  const double g = (1.5 * 1.5 * 1.5 / 3.25 - 0.5) / h - 0.8;

  Mat W0 = Mat::Zero(10, 2);
  W0(0, 0) = 1;
  W0(1, 0) = -1;
  W0(2, 0) = 1;
  W0(3, 0) = -1;
  W0(4, 0) = -1;
  W0(5, 1) = 1;
  W0(6, 1) = -1;
  W0(7, 1) = 1;
  W0(8, 1) = -1;
  W0(9, 1) = 1;
  Vec b0 = Vec::Zero(10);
  b0(2) = b0(3) = b0(7) = b0(8) = -0.5;
  b0(4) = b0(9) = -1.0;

  Mat W2 = Mat::Zero(2, 10);
  W2.block(0, 0, 1, 5) << a, -b, c, -d, -f;
  W2.block(1, 5, 1, 5) << 0.2, -0.2, 0.6, -0.6, g;

  Mlp mlp;
  mlp.activation = Activation::relu();
  mlp.layers = {{W0, b0}, {Mat::Identity(10, 10), Vec::Zero(10)}, {W2, Vec::Zero(2)}};
  return mlp;
}

BilinearNfl four_dim_system() {
  const Mat A = rows({{1, 0.3, 0.4, 0.1}, {1, -0.2, 0, 0.05}, {0, 1.2, -0.5, 0.02}, {0, 0, 0, 0.2}});
  const Mat B0 = rows({{1, 0}, {0, 1}, {0, 1}, {-1, 0}});
  Mat B1 = Mat::Zero(4, 4);
  B1(3, 3) = -0.5;
  Mat B2 = Mat::Zero(4, 4);
  B2(0, 0) = -0.3;
  B2(1, 0) = 0.3;
  const Mat C1 = -rows({{0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0.6, 0.3, 0.3, 1.2}});
  const Mat C2 = rows({{-0.3, 0, 0, 0}, {0.3, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, -0.15, 0}});

  BilinearNfl s = empty_plant(A, B0, 0.08);
  const Index l = 4, m = 2;
  const Mat* Bi[] = {&B1, &B2};
  for (Index j = 0; j < l; ++j)
    for (Index i = 0; i < m; ++i) s.Dt.col(j * m + i) = Bi[i]->col(j);

  // sum_i phi_i(u_i) C_i z = sum_j z_j [C1(:, j) C2(:, j)] phi(u).
  const Inn net = mlp_to_inn(four_dim_network());
  for (Index j = 0; j < l; ++j) {
    Mat Cj(l, m);
    Cj << C1.col(j), C2.col(j);
    s.psi_cols[static_cast<std::size_t>(j)] = map_output(net, Cj);
  }
  s.phi = Inn::zero(m, l, Activation::relu());
  return s;
}

BilinearNfl unstabilizable_system() {
  Mat A0 = Mat::Zero(2, 2);
  A0(0, 0) = 2.0;
  A0(1, 1) = 0.5;
  return empty_plant(A0, rows({{0}, {1}}), 1.0);
}

std::vector<NamedPlant> soundness_plants() {
  std::vector<NamedPlant> out;
  const Mat A0 = rows({{1.1, 0.4}, {0.0, 0.9}});
  const Mat B0 = rows({{0.0}, {1.0}});

  out.push_back({"linear", empty_plant(A0, B0, 1.0)});

  BilinearNfl bil = empty_plant(A0, B0, 0.5);
  bil.Dt = rows({{0.2, 0.0}, {0.1, -0.3}});
  out.push_back({"bilinear", bil});

  BilinearNfl both = bil;
  both.z_star = Vec::Zero(2);
  out.push_back({"relu-both-channels", with_networks(both, 11, Activation::relu(), 3, 0.1, 0.1, true, true)});

  out.push_back({"relu-phi", with_networks(empty_plant(A0, B0, 0.5), 12, Activation::relu(), 4, 0.2, 0.0, true,
                                           false)});

  BilinearNfl th = bil;
  th.z_star = rows({{0.05}, {-0.02}}).col(0);
  th.u_star = Vec::Constant(1, 0.1);
  th.region = RegionZ::ball(Vec::Zero(2), 0.5);
  out.push_back({"tanh-shifted", with_networks(th, 13, Activation::tanh(), 3, 0.1, 0.1, true, true)});

  const Activation sector = Activation::from_name("sin", -1.0, 1.0);
  out.push_back({"sin-both-channels", with_networks(bil, 14, sector, 3, 0.05, 0.05, true, true)});
  return out;
}

}  // namespace nfl::fixtures
