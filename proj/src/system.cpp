#include "nfl/system.hpp"

#include <sstream>

namespace nfl {

Mat RegionZ::block() const {
  Mat top = hstack({Qz, Sz});
  Mat bottom = hstack({Sz.transpose(), Rz});
  return vstack({top, bottom});
}

void RegionZ::validate() const {
  const Index l = Qz.rows();
  require_shape(Qz, l, l, "region Qz");
  require_shape(Sz, l, 1, "region Sz");
  require_shape(Rz, 1, 1, "region Rz");
  if (center.size() != l) throw ShapeMismatch("region center has wrong length");
  if (!all_finite(block()) || !center.allFinite()) throw NonFinite("region data is not finite");
  if (!is_symmetric(Qz)) throw Error("region Qz is not symmetric");
  if (max_eig(Qz) > -1e-9) throw Error("region Qz must be negative definite");
  if (!(Rz(0, 0) > 0.0)) throw Error("region Rz must be positive");
}

RegionZ RegionZ::ellipsoid(const Vec& center, const Mat& shape) {
  RegionZ r;
  r.Qz = -symmetrize(inverse(shape));
  r.Sz = Mat::Zero(center.size(), 1);
  r.Rz = Mat::Constant(1, 1, 1.0);
  r.center = center;
  return r;
}

RegionZ RegionZ::ball(const Vec& center, double radius) {
  RegionZ r;
  const Index l = center.size();
  r.Qz = -Mat::Identity(l, l);
  r.Sz = Mat::Zero(l, 1);
  r.Rz = Mat::Constant(1, 1, radius * radius);
  r.center = center;
  return r;
}

RegionZ RegionZ::shifted_to(const Vec& origin) const {
  if (origin.size() != dim()) throw ShapeMismatch("region shift: dimension mismatch");
  const Vec e = origin - center;
  RegionZ r;
  r.Qz = Qz;
  r.Sz = Qz * e + Sz;
  r.Rz = Mat::Constant(1, 1, e.dot(Qz * e) + 2.0 * e.dot(Sz.col(0)) + Rz(0, 0));
  r.center = Vec::Zero(dim());
  if (!(r.Rz(0, 0) > 0.0)) throw Error("equilibrium is not strictly inside the region");
  return r;
}

double region_margin(const RegionZ& region, const Vec& z) {
  if (z.size() != region.dim()) throw ShapeMismatch("region_contains: state dimension mismatch");
  const Vec d = z - region.center;
  return d.dot(region.Qz * d) + 2.0 * d.dot(region.Sz.col(0)) + region.Rz(0, 0);
}

bool region_contains(const RegionZ& region, const Vec& z) { return region_margin(region, z) >= -1e-12; }

Activation BilinearNfl::activation() const {
  if (phi.state_dim() > 0) return phi.activation;
  for (const auto& p : psi_cols) {
    if (p.state_dim() > 0) return p.activation;
  }
  return phi.activation;
}

void BilinearNfl::validate() const {
  const Index n = l();
  const Index nu = m();
  require_shape(A0, n, n, "plant A0");
  require_shape(B0, n, nu, "plant B0");
  require_shape(Dt, n, n * nu, "plant D~");
  if (!all_finite(A0) || !all_finite(B0) || !all_finite(Dt)) throw NonFinite("plant matrices are not finite");
  phi.validate();
  if (phi.input_dim() != nu || phi.output_dim() != n) throw ShapeMismatch("phi must map R^m to R^l");
  if (static_cast<Index>(psi_cols.size()) != n) {
    std::ostringstream msg;
    msg << "plant needs " << n << " psi columns, got " << psi_cols.size();
    throw ShapeMismatch(msg.str());
  }
  const Index kpsi = k_psi();
  for (const auto& p : psi_cols) {
    p.validate();
    if (p.input_dim() != nu || p.output_dim() != n) throw ShapeMismatch("psi column must map R^m to R^l");
    if (p.state_dim() != kpsi) throw ShapeMismatch("psi columns must share the internal dimension");
  }
  const Activation act = activation();
  auto check = [&](const Inn& inn) {
    if (inn.state_dim() > 0 && !inn.activation.same_as(act)) {
      throw MixedActivation("networks use different activations (" + inn.activation.name + " vs " + act.name + ")");
    }
  };
  check(phi);
  for (const auto& p : psi_cols) check(p);
  if (z_star.size() != n) throw ShapeMismatch("z* has wrong length");
  if (u_star.size() != nu) throw ShapeMismatch("u* has wrong length");
  region.validate();
  if (region.dim() != n) throw ShapeMismatch("region dimension does not match the state");
}

BilinearNfl BilinearNfl::without_networks() const {
  BilinearNfl out = *this;
  out.phi = Inn::zero(m(), l(), phi.activation);
  for (auto& p : out.psi_cols) p = Inn::zero(m(), l(), p.activation);
  return out;
}

Mat psi_matrix(const BilinearNfl& sys, const Vec& u) {
  Mat psi(sys.l(), sys.l());
  for (Index j = 0; j < sys.l(); ++j) psi.col(j) = evaluate_inn(sys.psi_cols[j], u).y;
  return psi;
}

Vec step_direct(const BilinearNfl& sys, const Vec& z, const Vec& u) {
  if (z.size() != sys.l() || u.size() != sys.m()) throw ShapeMismatch("step_direct: dimension mismatch");
  Vec zu(z.size() * u.size());
  for (Index i = 0; i < z.size(); ++i) zu.segment(i * u.size(), u.size()) = z(i) * u;
  return sys.A0 * z + sys.B0 * u + sys.Dt * zu + evaluate_inn(sys.phi, u).y + psi_matrix(sys, u) * z;
}

double check_equilibrium(const BilinearNfl& sys) {
  return (step_direct(sys, sys.z_star, sys.u_star) - sys.z_star).lpNorm<Eigen::Infinity>();
}

}  // namespace nfl
