#include "nfl/multiplier.hpp"

#include <limits>
#include <random>

namespace nfl {

namespace {

void check_slopes(double alpha, double beta) {
  if (!(alpha < beta)) throw Error("slope bounds require alpha < beta");
}

Mat diag_of(const Vec& t) { return t.asDiagonal(); }

}  // namespace

Mat delta_qc_blocks(const Vec& t, double alpha, double beta) {
  const Mat T = diag_of(t);
  const Index n = t.size();
  Mat out(2 * n, 2 * n);
  out << -2.0 * T, (alpha + beta) * T, (alpha + beta) * T, -2.0 * alpha * beta * T;
  return out;
}

double delta_qc_min_sample(const Activation& act, int samples, unsigned seed, double range) {
  const Mat M = delta_qc_blocks(Vec::Ones(1), act.alpha, act.beta);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-range, range);
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    const double x = unif(rng), y = unif(rng);
    Vec w(2);
    w << act(x) - act(y), x - y;
    worst = std::min(worst, w.dot(M * w));
  }
  return worst;
}

Mat bilinear_qc_blocks(const RegionZ& region, const Mat& Lambda) { return kron(region.block(), Lambda); }

void MultiplierVars::validate(const LfrDims& dims) const {
  require_shape(Lambda_m, dims.m, dims.m, "multiplier Lambda_m");
  require_shape(Lambda_kpsi, dims.k_psi, dims.k_psi, "multiplier Lambda_kpsi");
  if (T_kphi.size() != dims.k_phi) throw ShapeMismatch("multiplier T_kphi has wrong length");
  if (T_lkpsi.size() != dims.l * dims.k_psi) throw ShapeMismatch("multiplier T_lkpsi has wrong length");
}

MultiplierVars MultiplierVars::inverted() const {
  MultiplierVars out;
  out.Lambda_m = symmetrize(inverse(Lambda_m));
  out.Lambda_kpsi = symmetrize(inverse(Lambda_kpsi));
  if ((T_kphi.array() == 0.0).any() || (T_lkpsi.array() == 0.0).any()) throw Singular("zero T multiplier entry");
  out.T_kphi = T_kphi.cwiseInverse();
  out.T_lkpsi = T_lkpsi.cwiseInverse();
  return out;
}

Mat CombinedMultiplier::full() const { return vstack({hstack({Q, S}), hstack({S.transpose(), R})}); }

Mat CombinedMultiplier::full_tilde() const { return vstack({hstack({Qt, St}), hstack({St.transpose(), Rt})}); }

RegionInverse invert_region(const RegionZ& region) {
  const Index l = region.dim();
  const Mat inv = inverse(region.block());
  RegionInverse r;
  r.Qt = symmetrize(inv.topLeftCorner(l, l));
  r.St = inv.topRightCorner(l, 1);
  r.Rt = inv.bottomRightCorner(1, 1);
  r.S_hat = solve_linear(r.Qt, r.St);
  return r;
}

NnCoefficients nn_tilde_coefficients(double alpha, double beta) {
  check_slopes(alpha, beta);
  const double d2 = (alpha - beta) * (alpha - beta);
  return {2.0 * alpha * beta / d2, (alpha + beta) / d2, 2.0 / d2};
}

CombinedMultiplier assemble_combined(const MultiplierVars& vars, const RegionZ& region, const LfrDims& dims,
                                     double alpha, double beta) {
  vars.validate(dims);
  check_slopes(alpha, beta);
  const Index l = dims.l;
  const Mat Tf = diag_of(vars.T_kphi);
  const Mat Tp = diag_of(vars.T_lkpsi);
  CombinedMultiplier cm;
  cm.Q = block_diag({kron(region.Qz, vars.Lambda_m), block_diag_repeat(kron(region.Qz, vars.Lambda_kpsi), l),
                     -2.0 * Tf, -2.0 * Tp});
  cm.S = block_diag({kron(region.Sz, vars.Lambda_m), block_diag_repeat(kron(region.Sz, vars.Lambda_kpsi), l),
                     (alpha + beta) * Tf, (alpha + beta) * Tp});
  cm.R = block_diag({kron(region.Rz, vars.Lambda_m), block_diag_repeat(kron(region.Rz, vars.Lambda_kpsi), l),
                     -2.0 * alpha * beta * Tf, -2.0 * alpha * beta * Tp});
  return cm;
}

void invert_combined(const MultiplierVars& tilde, const RegionZ& region, const LfrDims& dims, double alpha,
                     double beta, CombinedMultiplier& out) {
  tilde.validate(dims);
  const Index l = dims.l;
  const RegionInverse ri = invert_region(region);
  const NnCoefficients c = nn_tilde_coefficients(alpha, beta);
  const Mat Tf = diag_of(tilde.T_kphi);
  const Mat Tp = diag_of(tilde.T_lkpsi);
  out.Qt = block_diag({kron(ri.Qt, tilde.Lambda_m), block_diag_repeat(kron(ri.Qt, tilde.Lambda_kpsi), l), c.q * Tf,
                       c.q * Tp});
  out.St = block_diag({kron(ri.St, tilde.Lambda_m), block_diag_repeat(kron(ri.St, tilde.Lambda_kpsi), l), c.s * Tf,
                       c.s * Tp});
  out.Rt = block_diag({kron(ri.Rt, tilde.Lambda_m), block_diag_repeat(kron(ri.Rt, tilde.Lambda_kpsi), l), c.r * Tf,
                       c.r * Tp});
}

Mat s_right_factor(const RegionZ& region, const LfrDims& dims, double alpha, double beta) {
  const Index l = dims.l;
  const RegionInverse ri = invert_region(region);
  const NnCoefficients c = nn_tilde_coefficients(alpha, beta);
  return block_diag({kron(ri.S_hat, Mat::Identity(dims.m, dims.m)),
                     block_diag_repeat(kron(ri.S_hat, Mat::Identity(dims.k_psi, dims.k_psi)), l),
                     c.s * Mat::Identity(dims.k_phi, dims.k_phi), c.s * Mat::Identity(l * dims.k_psi, l * dims.k_psi)});
}

void factor_s_tilde(const MultiplierVars& tilde, const RegionZ& region, const LfrDims& dims, double alpha,
                    double beta, CombinedMultiplier& out) {
  tilde.validate(dims);
  const Index l = dims.l;
  const RegionInverse ri = invert_region(region);
  out.SL = block_diag({kron(ri.Qt, tilde.Lambda_m), block_diag_repeat(kron(ri.Qt, tilde.Lambda_kpsi), l),
                       diag_of(tilde.T_kphi), diag_of(tilde.T_lkpsi)});
  out.SR = s_right_factor(region, dims, alpha, beta);
}

CombinedMultiplier build_multiplier(const MultiplierVars& vars, const RegionZ& region, const LfrDims& dims,
                                    double alpha, double beta) {
  CombinedMultiplier cm = assemble_combined(vars, region, dims, alpha, beta);
  const MultiplierVars tilde = vars.inverted();
  invert_combined(tilde, region, dims, alpha, beta, cm);
  factor_s_tilde(tilde, region, dims, alpha, beta, cm);
  return cm;
}

}  // namespace nfl
