#include "nfl/controller.hpp"

#include <cmath>
#include <sstream>

namespace nfl {

ImplicitController ImplicitController::from(const ShiftedLfr& lfr, const SynthesisResult& res) {
  ImplicitController c;
  c.l = lfr.dims.l;
  c.m = lfr.dims.m;
  c.k_phi = lfr.dims.k_phi;
  c.k_psi = lfr.dims.k_psi;
  c.Kz = res.Kz;
  c.Ku = res.Ku;
  c.Kw = res.Kw;
  c.Kphi = res.Kphi;
  c.Kpsi = res.Kpsi;
  c.Fphi = lfr.Fphi;
  c.Gphi = lfr.Gphi;
  c.Fpsi = lfr.Fpsi;
  c.Gpsi = lfr.Gpsi;
  c.activation = lfr.activation;
  c.z_star = lfr.z_star;
  c.u_star = lfr.u_star;
  c.v_phi_star = lfr.v_phi_star;
  c.v_psi_star = lfr.v_psi_star;
  c.s_phi_star = lfr.s_phi_star;
  c.s_psi_star = lfr.s_psi_star;
  c.validate();
  return c;
}

void ImplicitController::validate() const {
  const Index lk = l * k_psi;
  require_shape(Kz, m, l, "controller K_z");
  require_shape(Ku, m, l * m, "controller K_u");
  require_shape(Kw, m, l * lk, "controller K_wpsi");
  require_shape(Kphi, m, k_phi, "controller K_phi");
  require_shape(Kpsi, m, lk, "controller K_psi");
  require_shape(Fphi, k_phi, k_phi, "controller F_phi");
  require_shape(Gphi, k_phi, m, "controller G_phi");
  require_shape(Fpsi, lk, lk, "controller F_psi");
  require_shape(Gpsi, lk, m, "controller G_psi");
  if (z_star.size() != l || u_star.size() != m) throw ShapeMismatch("controller equilibrium has wrong length");
  if (v_phi_star.size() != k_phi || s_phi_star.size() != k_phi) throw ShapeMismatch("controller phi shift data");
  if (v_psi_star.size() != lk || s_psi_star.size() != lk) throw ShapeMismatch("controller psi shift data");
  if (!(settings.tol > 0.0)) throw Error("controller tolerance must be positive");
  if (!(settings.damping > 0.0 && settings.damping <= 1.0)) throw Error("controller damping must lie in (0, 1]");
}

namespace {

struct Parts {
  Vec u, sf, sp;
};

Parts split(const ImplicitController& c, const Vec& x) {
  return {x.head(c.m), x.segment(c.m, c.k_phi), x.tail(c.l * c.k_psi)};
}

// Right-hand side of the three equations at x = (u~, s~phi, s~psi).
Vec image(const ImplicitController& c, const Vec& zt, const Vec& x) {
  const Parts p = split(c, x);
  Vec out(x.size());
  out.head(c.m) = c.Kz * zt + c.Ku * kron_vec(zt, p.u) + c.Kw * bilinear_psi_signal(zt, p.sp, c.k_psi) +
                  c.Kphi * p.sf + c.Kpsi * p.sp;
  out.segment(c.m, c.k_phi) = c.activation.apply(c.Fphi * p.sf + c.Gphi * p.u + c.v_phi_star) - c.s_phi_star;
  out.tail(c.l * c.k_psi) = c.activation.apply(c.Fpsi * p.sp + c.Gpsi * p.u + c.v_psi_star) - c.s_psi_star;
  return out;
}

double res_norm(const ImplicitController& c, const Vec& zt, const Vec& x) {
  return (x - image(c, zt, x)).lpNorm<Eigen::Infinity>();
}

// Newton steps on g(x) = x - T(x) with a forward-difference Jacobian and backtracking.
bool quasi_newton(const ImplicitController& c, const Vec& zt, Vec& x, double& r, int& iters, int budget) {
  const Index n = x.size();
  for (int it = 0; it < budget; ++it) {
    const Vec g = x - image(c, zt, x);
    r = g.lpNorm<Eigen::Infinity>();
    if (r <= c.settings.tol) return true;
    Mat J(n, n);
    for (Index j = 0; j < n; ++j) {
      const double h = 1e-7 * std::max(1.0, std::abs(x(j)));
      Vec xp = x;
      xp(j) += h;
      J.col(j) = (xp - image(c, zt, xp) - g) / h;
    }
    const Vec dx = J.fullPivLu().solve(-g);
    if (!dx.allFinite()) return false;
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
      const Vec xn = x + step * dx;
      const double rn = res_norm(c, zt, xn);
      ++iters;
      if (rn < r) {
        x = xn;
        r = rn;
        moved = true;
        break;
      }
    }
    if (!moved) return r <= c.settings.tol;
  }
  r = res_norm(c, zt, x);
  return r <= c.settings.tol;
}

}  // namespace

ControlOutput evaluate(const ImplicitController& c, const Vec& z, WarmStart* warm) {
  if (z.size() != c.l) throw ShapeMismatch("controller: state has wrong length");
  const Vec zt = z - c.z_star;
  const Index n = c.unknowns();
  Vec x = (warm && warm->valid && warm->x.size() == n) ? warm->x : Vec(Vec::Zero(n));

  const ControllerSettings& s = c.settings;
  ControlOutput out;
  const bool explicit_u = c.Ku.isZero(0.0) && c.Kw.isZero(0.0) && c.Kphi.isZero(0.0) && c.Kpsi.isZero(0.0);
  if (explicit_u) {
    // u~ = Kz z~ directly; the network states follow by plain substitution.
    x.head(c.m) = c.Kz * zt;
    for (Index k = 0; k <= n; ++k) {
      const Vec next = image(c, zt, x);
      if (next == x) break;
      x.tail(n - c.m) = next.tail(n - c.m);
    }
    if (res_norm(c, zt, x) <= s.tol) {
      const Parts p = split(c, x);
      out.u = p.u + c.u_star;
      out.s_phi = p.sf;
      out.s_psi = p.sp;
      out.iterations = 1;
      out.residual = res_norm(c, zt, x);
      if (warm) {
        warm->valid = true;
        warm->x = x;
      }
      return out;
    }
  }
  double r = res_norm(c, zt, x);
  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(std::min(s.max_iter, 100000)) + 1);
  history.push_back(r);
  int it = 0;
  while (r > s.tol && it < s.max_iter) {
    x = (1.0 - s.damping) * x + s.damping * image(c, zt, x);
    r = res_norm(c, zt, x);
    ++it;
    history.push_back(r);
    if (!std::isfinite(r)) break;
    if (it >= s.plateau_window && r > 0.5 * history[static_cast<std::size_t>(it - s.plateau_window)]) {
      out.fallback = true;
      break;
    }
  }
  if (r > s.tol) {
    if (!std::isfinite(r)) x = (warm && warm->valid && warm->x.size() == n) ? warm->x : Vec(Vec::Zero(n));
    out.fallback = true;
    const bool ok = quasi_newton(c, zt, x, r, it, 200);
    if (!ok) {
      std::ostringstream msg;
      msg << "controller did not converge at ||z - z*||_inf = " << zt.lpNorm<Eigen::Infinity>() << " (residual "
          << r << " after " << it << " iterations)";
      throw NoConvergence(msg.str());
    }
  }
  const Parts p = split(c, x);
  out.u = p.u + c.u_star;
  out.s_phi = p.sf;
  out.s_psi = p.sp;
  out.iterations = it;
  out.residual = r;
  if (warm) {
    warm->valid = true;
    warm->x = x;
  }
  return out;
}

double residual(const ImplicitController& c, const Vec& z, const Vec& u, const Vec& s_phi, const Vec& s_psi) {
  if (z.size() != c.l || u.size() != c.m || s_phi.size() != c.k_phi || s_psi.size() != c.l * c.k_psi) {
    throw ShapeMismatch("controller residual: dimension mismatch");
  }
  Vec x(c.unknowns());
  x << u - c.u_star, s_phi, s_psi;
  return res_norm(c, z - c.z_star, x);
}

}  // namespace nfl
