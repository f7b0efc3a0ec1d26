#include <doctest.h>

#include <cmath>

#include "nfl/multiplier.hpp"
#include "support.hpp"

using namespace nfl;
using nfl::testing::Rng;

namespace {

Mat random_psd(Rng& rng, Index n) { return rng.spd(n, 0.05); }

MultiplierVars random_vars(Rng& rng, const LfrDims& d) {
  MultiplierVars v;
  v.Lambda_m = random_psd(rng, d.m);
  v.Lambda_kpsi = random_psd(rng, d.k_psi);
  v.T_kphi = (rng.vec(d.k_phi).array().abs() + 0.1).matrix();
  v.T_lkpsi = (rng.vec(d.l * d.k_psi).array().abs() + 0.1).matrix();
  return v;
}

// Unit-ball region shifted so the origin sits at an interior point.
RegionZ random_region(Rng& rng, Index l) {
  const RegionZ base = RegionZ::ellipsoid(Vec::Zero(l), rng.spd(l, 0.5));
  return base.shifted_to(rng.vec(l, 0.05));
}

Vec sample_inside(Rng& rng, const RegionZ& r) {
  for (;;) {
    const Vec z = r.center + rng.vec(r.dim(), 3.0);
    if (region_margin(r, z) >= 0.0) return z;
  }
}

double min_eig_sym(const Mat& m) { return Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (m + m.transpose())).eigenvalues().minCoeff(); }

}  // namespace

TEST_CASE("delta QC blocks for ReLU and odd bounds") {
  const Mat relu = delta_qc_blocks(Vec::Ones(3), 0.0, 1.0);
  Mat expect = Mat::Zero(6, 6);
  expect.topLeftCorner(3, 3) = -2.0 * Mat::Identity(3, 3);
  expect.topRightCorner(3, 3) = Mat::Identity(3, 3);
  expect.bottomLeftCorner(3, 3) = Mat::Identity(3, 3);
  CHECK((relu - expect).cwiseAbs().maxCoeff() == 0.0);

  const double t = 0.7;
  const Mat sym = delta_qc_blocks(Vec::Constant(1, t), -1.0, 1.0);
  CHECK(sym(0, 0) == doctest::Approx(-2 * t));
  CHECK(sym(0, 1) == 0.0);
  CHECK(sym(1, 0) == 0.0);
  CHECK(sym(1, 1) == doctest::Approx(2 * t));
}

TEST_CASE("delta QC form factors as a product of slope gaps") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(-1, 0), b = rng.uniform(0.5, 2), t = rng.uniform(0.1, 2);
    const double dphi = rng.uniform(), dx = rng.uniform();
    const Mat M = delta_qc_blocks(Vec::Constant(1, t), a, b);
    Vec w(2);
    w << dphi, dx;
    CHECK(w.dot(M * w) == doctest::Approx(2 * t * (dphi - a * dx) * (b * dx - dphi)).epsilon(1e-12));
  }
}

TEST_CASE("sampled delta QC holds for the built-in activations") {
  for (const Activation& act : {Activation::relu(), Activation::tanh(), Activation::sigmoid()})
    CHECK(delta_qc_min_sample(act, 10000, 42) >= -1e-12);
  CHECK(delta_qc_min_sample(Activation::from_name("sin", -1.0, 1.0), 10000, 7) >= -1e-12);
  // Declaring bounds tighter than the true slopes must be caught.
  CHECK(delta_qc_min_sample(Activation::from_name("tanh", 0.0, 0.5), 10000, 42) < 0.0);
}

TEST_CASE("bilinear QC with scalar multiplier is the region block") {
  Rng rng(2);
  const RegionZ r = random_region(rng, 3);
  CHECK((bilinear_qc_blocks(r, Mat::Ones(1, 1)) - r.block()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bilinear QC holds inside the region and fails outside") {
  Rng rng(3);
  const Index l = 3, m = 2;
  const RegionZ r = RegionZ::ball(Vec::Zero(l), 0.5);
  for (int i = 0; i < 1000; ++i) {
    const Vec z = sample_inside(rng, r);
    const Mat lam = random_psd(rng, m);
    const Mat M = bilinear_qc_blocks(r, lam);
    const Mat lower = vstack({kron(z, Mat::Identity(m, m)), Mat::Identity(m, m)});
    CHECK(min_eig_sym(lower.transpose() * M * lower) >= -1e-10);
  }
  for (int i = 0; i < 100; ++i) {
    const Vec z = rng.unit(l) * rng.uniform(0.51, 2.0);
    const Mat M = bilinear_qc_blocks(r, Mat::Identity(m, m));
    const Mat lower = vstack({kron(z, Mat::Identity(m, m)), Mat::Identity(m, m)});
    CHECK(min_eig_sym(lower.transpose() * M * lower) < 0.0);
  }
}

TEST_CASE("combined multiplier block sizes") {
  Rng rng(4);
  const LfrDims d{3, 2, 4, 2};
  const CombinedMultiplier cm = assemble_combined(random_vars(rng, d), random_region(rng, 3), d, 0.0, 1.0);
  CHECK(cm.Q.rows() == d.mc());
  CHECK(cm.R.rows() == d.nc());
  CHECK(cm.S.rows() == d.mc());
  CHECK(cm.S.cols() == d.nc());
  MultiplierVars bad = random_vars(rng, d);
  bad.T_kphi = Vec::Ones(1);
  CHECK_THROWS_AS(assemble_combined(bad, random_region(rng, 3), d, 0.0, 1.0), ShapeMismatch);
}

TEST_CASE("identity multipliers match the single-channel constructors") {
  const LfrDims d{2, 2, 3, 1};
  const RegionZ r = RegionZ::ball(Vec::Zero(2), 1.0);
  MultiplierVars v{Mat::Identity(2, 2), Mat::Identity(1, 1), Vec::Ones(3), Vec::Ones(2)};
  const CombinedMultiplier cm = assemble_combined(v, r, d, 0.0, 1.0);
  const Mat bu = bilinear_qc_blocks(r, Mat::Identity(2, 2));
  CHECK((cm.Q.topLeftCorner(4, 4) - bu.topLeftCorner(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cm.S.topLeftCorner(4, 2) - bu.topRightCorner(4, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cm.R.topLeftCorner(2, 2) - bu.bottomRightCorner(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  const Mat nn = delta_qc_blocks(Vec::Ones(3), 0.0, 1.0);
  // s_phi block: q offset lm + l^2 k = 8, p offset m + l k = 4.
  CHECK((cm.Q.block(8, 8, 3, 3) - nn.topLeftCorner(3, 3)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cm.S.block(8, 4, 3, 3) - nn.topRightCorner(3, 3)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cm.R.block(4, 4, 3, 3) - nn.bottomRightCorner(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("combined multiplier is nonnegative on admissible uncertainties") {
  Rng rng(5);
  const LfrDims d{2, 2, 3, 2};
  const double a = -0.5, b = 1.0;
  const RegionZ r = random_region(rng, 2);
  for (int i = 0; i < 200; ++i) {
    const CombinedMultiplier cm = assemble_combined(random_vars(rng, d), r, d, a, b);
    const Vec z = sample_inside(rng, r);
    Mat dpsi = Mat::Zero(d.l * d.l * d.k_psi, d.l * d.k_psi);
    for (Index j = 0; j < d.l; ++j)
      dpsi.block(j * d.l * d.k_psi, j * d.k_psi, d.l * d.k_psi, d.k_psi) = kron(z, Mat::Identity(d.k_psi, d.k_psi));
    Vec sec_phi(d.k_phi), sec_psi(d.l * d.k_psi);
    for (Index j = 0; j < sec_phi.size(); ++j) sec_phi(j) = rng.uniform(a, b);
    for (Index j = 0; j < sec_psi.size(); ++j) sec_psi(j) = rng.uniform(a, b);
    const Mat delta = block_diag({kron(z, Mat::Identity(d.m, d.m)), dpsi, Mat(sec_phi.asDiagonal()), Mat(sec_psi.asDiagonal())});
    const Mat lower = vstack({delta, Mat::Identity(d.nc(), d.nc())});
    CHECK(min_eig_sym(lower.transpose() * cm.full() * lower) >= -1e-9);
  }
}

TEST_CASE("scalar ReLU channel inverse") {
  const double t = 0.8;
  Mat m(2, 2);
  m << -2 * t, t, t, 0;
  Mat expect(2, 2);
  expect << 0, 1 / t, 1 / t, 2 / t;
  CHECK((m.inverse() - expect).cwiseAbs().maxCoeff() <= 1e-12);
  const LfrDims d{1, 1, 1, 0};
  MultiplierVars v{Mat::Ones(1, 1), Mat::Zero(0, 0), Vec::Constant(1, t), Vec::Zero(0)};
  const CombinedMultiplier cm = build_multiplier(v, RegionZ::ball(Vec::Zero(1), 1.0), d, 0.0, 1.0);
  CHECK(std::abs(cm.Qt(1, 1) - expect(0, 0)) <= 1e-12);
  CHECK(std::abs(cm.St(1, 1) - expect(0, 1)) <= 1e-12);
  CHECK(std::abs(cm.Rt(1, 1) - expect(1, 1)) <= 1e-12);
}

TEST_CASE("region inverse agrees with dense inversion") {
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    const RegionZ r = random_region(rng, 3);
    const RegionInverse ri = invert_region(r);
    const Mat dense = r.block().inverse();
    CHECK((ri.Qt - dense.topLeftCorner(3, 3)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((ri.St - dense.topRightCorner(3, 1)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(std::abs(ri.Rt(0, 0) - dense(3, 3)) <= 1e-10);
  }
}

TEST_CASE("tilde blocks invert the combined multiplier") {
  Rng rng(7);
  const std::pair<double, double> slopes[] = {{0.0, 1.0}, {-1.0, 1.0}, {0.1, 0.9}};
  for (int i = 0; i < 50; ++i) {
    const LfrDims d{rng.integer(1, 3), rng.integer(1, 2), rng.integer(0, 4), rng.integer(0, 3)};
    const auto [a, b] = slopes[i % 3];
    const CombinedMultiplier cm = build_multiplier(random_vars(rng, d), random_region(rng, d.l), d, a, b);
    const Mat prod = cm.full() * cm.full_tilde();
    CHECK((prod - Mat::Identity(prod.rows(), prod.cols())).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((cm.SL * cm.SR - cm.St).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(min_eig_sym(cm.SL * cm.SL.transpose()) > 0.0);
  }
}

TEST_CASE("NN channel factor blocks") {
  const double a = -0.5, b = 2.0;
  const LfrDims d{1, 1, 2, 0};
  MultiplierVars v{Mat::Ones(1, 1), Mat::Zero(0, 0), Vec::Constant(2, 4.0), Vec::Zero(0)};
  const CombinedMultiplier cm = build_multiplier(v, RegionZ::ball(Vec::Zero(1), 1.0), d, a, b);
  const double c = (a + b) / ((a - b) * (a - b));
  CHECK(cm.SL(1, 1) == doctest::Approx(0.25));
  CHECK(cm.SR(1, 1) == doctest::Approx(c));
  CHECK(cm.St(1, 1) == doctest::Approx(0.25 * c));
}

TEST_CASE("equal slope bounds are rejected") {
  CHECK_THROWS_AS(nn_tilde_coefficients(1.0, 1.0), Error);
}
