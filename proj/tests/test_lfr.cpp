#include <doctest.h>

#include "nfl/fixtures.hpp"
#include "nfl/lfr.hpp"
#include "support.hpp"

using namespace nfl;
using nfl::testing::Rng;

namespace {

double inf_norm(const Vec& v) { return v.lpNorm<Eigen::Infinity>(); }

struct Shape {
  Index l, m, kphi, kpsi;
};

const Shape kShapes[] = {{1, 1, 0, 0}, {2, 1, 3, 0}, {2, 2, 0, 4}, {3, 2, 5, 2}, {3, 1, 6, 6}, {2, 2, 1, 1}};

}  // namespace

TEST_CASE("kron_vec is z kron u") {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const Index l = rng.integer(1, 4), m = rng.integer(1, 3);
    const Vec z = rng.vec(l), u = rng.vec(m);
    const Vec ref = kron(z, Mat::Identity(m, m)) * u;
    CHECK(inf_norm(kron_vec(z, u) - ref) <= 1e-15);
    for (Index i = 0; i < l; ++i)
      for (Index j = 0; j < m; ++j) CHECK(kron_vec(z, u)(i * m + j) == z(i) * u(j));
  }
}

TEST_CASE("bilinear psi signal matches the block-diagonal product") {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const Index l = rng.integer(1, 3), k = rng.integer(1, 4);
    const Vec z = rng.vec(l), s = rng.vec(l * k);
    const Mat zk = kron(z, Mat::Identity(k, k));
    Mat big = Mat::Zero(l * l * k, l * k);
    for (Index i = 0; i < l; ++i) big.block(i * l * k, i * k, l * k, k) = zk;
    CHECK(inf_norm(bilinear_psi_signal(z, s, k) - big * s) <= 1e-15);
  }
}

TEST_CASE("channel dimensions") {
  for (const Shape& sh : kShapes) {
    LfrDims d{sh.l, sh.m, sh.kphi, sh.kpsi};
    const auto q = d.q_sizes();
    const auto p = d.p_sizes();
    CHECK(q[0] + q[1] + q[2] + q[3] == d.mc());
    CHECK(p[0] + p[1] + p[2] + p[3] == d.nc());
  }
}

TEST_CASE("unshifted LFR reproduces the plant step") {
  Rng rng(3);
  for (const Shape& sh : kShapes) {
    for (const Activation& act : {Activation::relu(), Activation::tanh(), Activation::sigmoid()}) {
      const BilinearNfl s = nfl::testing::random_plant(rng, sh.l, sh.m, sh.kphi, sh.kpsi, act);
      const Lfr lfr = build_lfr(s);
      CHECK(lfr.M.rows() == sh.l + lfr.dims.nc());
      CHECK(lfr.M.cols() == sh.l + sh.m + lfr.dims.mc());
      CHECK(lfr.bias.size() == lfr.M.rows());
      // At the origin only the bias terms act.
      CHECK(inf_norm(close_lfr_step(lfr, Vec::Zero(sh.l), Vec::Zero(sh.m)) -
                     step_direct(s, Vec::Zero(sh.l), Vec::Zero(sh.m))) <= 1e-9);
      for (int t = 0; t < 10; ++t) {
        const Vec z = rng.vec(sh.l), u = rng.vec(sh.m);
        CHECK(inf_norm(close_lfr_step(lfr, z, u) - step_direct(s, z, u)) <= 1e-9);
      }
    }
  }
}

TEST_CASE("shifted LFR has a fixed point at the origin") {
  Rng rng(4);
  for (const Shape& sh : kShapes) {
    const BilinearNfl s = nfl::testing::random_plant(rng, sh.l, sh.m, sh.kphi, sh.kpsi, Activation::tanh());
    const ShiftedLfr lfr = shift_lfr(s);
    CHECK(inf_norm(shifted_step(lfr, Vec::Zero(sh.l), Vec::Zero(sh.m))) <= 1e-9);
  }
}

TEST_CASE("shifted step agrees with the plant in shifted coordinates") {
  Rng rng(5);
  for (const Shape& sh : kShapes) {
    const BilinearNfl s = nfl::testing::random_plant(rng, sh.l, sh.m, sh.kphi, sh.kpsi, Activation::relu());
    const ShiftedLfr lfr = shift_lfr(s);
    for (int t = 0; t < 10; ++t) {
      const Vec zt = rng.vec(sh.l, 0.3), ut = rng.vec(sh.m, 0.3);
      const Vec ref = step_direct(s, s.z_star + zt, s.u_star + ut) - s.z_star;
      CHECK(inf_norm(shifted_step(lfr, zt, ut) - ref) <= 1e-9);
    }
  }
}

TEST_CASE("shifted matrices close the loop through the channel map") {
  Rng rng(6);
  for (const Shape& sh : kShapes) {
    const BilinearNfl s = nfl::testing::random_plant(rng, sh.l, sh.m, sh.kphi, sh.kpsi, Activation::sigmoid());
    const ShiftedLfr lfr = shift_lfr(s);
    const Vec zt = rng.vec(sh.l, 0.2), ut = rng.vec(sh.m, 0.2);
    const Vec sphi = shifted_state(lfr.phi_net, lfr.Fphi, lfr.Gphi, lfr.v_phi_star, lfr.s_phi_star, ut);
    const Vec spsi = shifted_state(lfr.psi_net, lfr.Fpsi, lfr.Gpsi, lfr.v_psi_star, lfr.s_psi_star, ut);
    const Vec q = vstack({kron_vec(zt, ut), bilinear_psi_signal(zt, spsi, sh.kpsi), sphi, spsi});
    const Vec zp = lfr.calA * zt + lfr.calB * ut + lfr.Bq() * q;
    const Vec ref = step_direct(s, s.z_star + zt, s.u_star + ut) - s.z_star;
    CHECK(inf_norm(zp - ref) <= 1e-9);
  }
}

TEST_CASE("zero equilibrium leaves no shift terms") {
  Rng rng(7);
  BilinearNfl s = fixtures::four_dim_system();
  const ShiftedLfr lfr = shift_lfr(s);
  CHECK(lfr.Astar_u.isZero(0.0));
  CHECK(lfr.Hpsi_star.isZero(0.0));
  CHECK(lfr.Astar_spsi.isZero(1e-15));
  CHECK(inf_norm(lfr.s_psi_star) <= 1e-15);
  for (int t = 0; t < 10; ++t) {
    const Vec z = rng.vec(4, 0.05), u = rng.vec(2, 0.5);
    CHECK(inf_norm(shifted_step(lfr, z, u) - step_direct(s, z, u)) <= 1e-12);
  }
}
