#include "nfl/lfr.hpp"

namespace nfl {

namespace {

Inn block_diag_net(const std::vector<Inn>& nets, Index input_dim, const Activation& act) {
  std::vector<Mat> F;
  std::vector<Mat> G;
  std::vector<Mat> bx;
  Inn out;
  out.wellposed_by_structure = true;
  for (const auto& n : nets) {
    F.push_back(n.F);
    G.push_back(n.G);
    bx.push_back(n.bx);
    out.wellposed_by_structure = out.wellposed_by_structure && n.wellposed_by_structure;
    out.block_sizes.insert(out.block_sizes.end(), n.block_sizes.begin(), n.block_sizes.end());
  }
  out.F = block_diag(F);
  out.G = G.empty() ? Mat::Zero(0, input_dim) : vstack(G);
  out.bx = bx.empty() ? Vec::Zero(0) : Vec(vstack(bx));
  const Index k = out.F.rows();
  out.H = Mat::Zero(0, k);
  out.J = Mat::Zero(0, input_dim);
  out.by = Vec::Zero(0);
  out.activation = act;
  if (!out.wellposed_by_structure) out.block_sizes.clear();
  return out;
}

}  // namespace

StackedPsi stack_psi(const std::vector<Inn>& psi_cols) {
  if (psi_cols.empty()) throw ShapeMismatch("stack_psi: no columns");
  const Index l = static_cast<Index>(psi_cols.size());
  const Index k = psi_cols.front().state_dim();
  const Index m = psi_cols.front().input_dim();
  for (const auto& c : psi_cols) {
    if (c.state_dim() != k || c.input_dim() != m || c.output_dim() != l) {
      throw ShapeMismatch("stack_psi: columns must share dimensions");
    }
    if (k > 0 && !c.activation.same_as(psi_cols.front().activation)) {
      throw MixedActivation("stack_psi: columns use different activations");
    }
  }
  StackedPsi st;
  st.H = Mat::Zero(l, l * l * k);
  st.J = Mat::Zero(l, l * m);
  st.By = Mat::Zero(l, l);
  for (Index i = 0; i < l; ++i) {
    // [H_1 ... H_l](E_i kron I_k) keeps only H_i, placed at sub-block i of block i.
    st.H.block(0, i * l * k + i * k, l, k) = psi_cols[i].H;
    st.J.middleCols(i * m, m) = psi_cols[i].J;
    st.By.col(i) = psi_cols[i].by;
  }
  st.net = block_diag_net(psi_cols, m, psi_cols.front().activation);
  st.F = st.net.F;
  st.G = st.net.G;
  st.bx = st.net.bx;
  return st;
}

Vec kron_vec(const Vec& z, const Vec& u) {
  Vec out(z.size() * u.size());
  for (Index i = 0; i < z.size(); ++i) out.segment(i * u.size(), u.size()) = z(i) * u;
  return out;
}

Vec bilinear_psi_signal(const Vec& z, const Vec& s_psi, Index k) {
  const Index l = z.size();
  Vec out(l * l * k);
  for (Index i = 0; i < l; ++i) out.segment(i * l * k, l * k) = kron_vec(z, s_psi.segment(i * k, k));
  return out;
}

Lfr build_lfr(const BilinearNfl& sys) {
  sys.validate();
  const StackedPsi st = stack_psi(sys.psi_cols);
  Lfr lfr;
  lfr.dims = {sys.l(), sys.m(), sys.k_phi(), sys.k_psi()};
  const Index l = sys.l(), m = sys.m(), kf = sys.k_phi(), kp = sys.k_psi();
  const auto q = lfr.dims.q_sizes();
  const Index rows = l + m + l * kp + kf + l * kp;
  const Index cols = l + m + q[0] + q[1] + q[2] + q[3];
  lfr.M = Mat::Zero(rows, cols);
  const Index c_u = l, c_wu = l + m, c_wpsi = c_wu + q[0], c_sphi = c_wpsi + q[1], c_spsi = c_sphi + q[2];
  const Index r_u = l, r_spsi = l + m, r_vphi = r_spsi + l * kp, r_vpsi = r_vphi + kf;

  lfr.M.block(0, 0, l, l) = sys.A0 + st.By;
  lfr.M.block(0, c_u, l, m) = sys.B0 + sys.phi.J;
  lfr.M.block(0, c_wu, l, q[0]) = sys.Dt + st.J;
  lfr.M.block(0, c_wpsi, l, q[1]) = st.H;
  lfr.M.block(0, c_sphi, l, kf) = sys.phi.H;

  lfr.M.block(r_u, c_u, m, m).setIdentity();
  lfr.M.block(r_spsi, c_spsi, l * kp, l * kp).setIdentity();

  lfr.M.block(r_vphi, c_u, kf, m) = sys.phi.G;
  lfr.M.block(r_vphi, c_sphi, kf, kf) = sys.phi.F;
  lfr.M.block(r_vpsi, c_u, l * kp, m) = st.G;
  lfr.M.block(r_vpsi, c_spsi, l * kp, l * kp) = st.F;

  lfr.bias = Vec::Zero(rows);
  lfr.bias.head(l) = sys.phi.by;
  lfr.bias.segment(r_vphi, kf) = sys.phi.bx;
  lfr.bias.segment(r_vpsi, l * kp) = st.bx;

  lfr.phi_net = block_diag_net({sys.phi}, m, sys.phi.activation);
  lfr.psi_net = st.net;
  return lfr;
}

Vec close_lfr_step(const Lfr& lfr, const Vec& z, const Vec& u) {
  const auto& d = lfr.dims;
  const auto q = d.q_sizes();
  const Index l = d.l, m = d.m, kf = d.k_phi, kp = d.k_psi;
  const Index r_vphi = l + m + l * kp, r_vpsi = r_vphi + kf;
  const Index c_sphi = l + m + q[0] + q[1], c_spsi = c_sphi + q[2];

  // The v rows couple to s only through the diagonal F blocks; solve them as INN states.
  Vec zu(l + m);
  zu << z, u;
  Inn phi = lfr.phi_net;
  phi.F = lfr.M.block(r_vphi, c_sphi, kf, kf);
  Inn psi = lfr.psi_net;
  psi.F = lfr.M.block(r_vpsi, c_spsi, l * kp, l * kp);
  const Vec s_phi = solve_implicit_state(phi, lfr.M.block(r_vphi, 0, kf, l + m) * zu + lfr.bias.segment(r_vphi, kf));
  const Vec s_psi =
      solve_implicit_state(psi, lfr.M.block(r_vpsi, 0, l * kp, l + m) * zu + lfr.bias.segment(r_vpsi, l * kp));

  Vec in(lfr.M.cols());
  in << z, u, kron_vec(z, u), bilinear_psi_signal(z, s_psi, kp), s_phi, s_psi;
  return lfr.M.topRows(l) * in + lfr.bias.head(l);
}

Mat ShiftedLfr::Bq() const { return hstack({DJ, Hpsi, Hphi, Hpsi_star}); }

Mat ShiftedLfr::Dpu() const {
  return vstack({Mat::Identity(dims.m, dims.m), Mat::Zero(dims.l * dims.k_psi, dims.m), Gphi, Gpsi});
}

Mat ShiftedLfr::Dpq() const {
  const auto q = dims.q_sizes();
  const auto p = dims.p_sizes();
  Mat D = Mat::Zero(dims.nc(), dims.mc());
  const Index c_sphi = q[0] + q[1], c_spsi = c_sphi + q[2];
  const Index r_spsi = p[0], r_vphi = r_spsi + p[1], r_vpsi = r_vphi + p[2];
  D.block(r_spsi, c_spsi, p[1], q[3]).setIdentity();
  D.block(r_vphi, c_sphi, p[2], q[2]) = Fphi;
  D.block(r_vpsi, c_spsi, p[3], q[3]) = Fpsi;
  return D;
}

ShiftedLfr shift_lfr(const BilinearNfl& sys) {
  sys.validate();
  const StackedPsi st = stack_psi(sys.psi_cols);
  ShiftedLfr s;
  s.dims = {sys.l(), sys.m(), sys.k_phi(), sys.k_psi()};
  s.activation = sys.activation();
  const Index l = sys.l(), m = sys.m(), kp = sys.k_psi();

  s.phi_net = block_diag_net({sys.phi}, m, sys.phi.activation);
  s.psi_net = st.net;
  s.z_star = sys.z_star;
  s.u_star = sys.u_star;
  const InternalState phi_star = internal_state_at(s.phi_net, sys.u_star);
  const InternalState psi_star = internal_state_at(s.psi_net, sys.u_star);
  s.s_phi_star = phi_star.s;
  s.v_phi_star = phi_star.v;
  s.s_psi_star = psi_star.s;
  s.v_psi_star = psi_star.v;

  s.DJ = sys.Dt + st.J;
  s.Hpsi = st.H;
  s.Hphi = sys.phi.H;
  s.By_psi = st.By;
  s.Gphi = sys.phi.G;
  s.Fphi = sys.phi.F;
  s.Gpsi = st.G;
  s.Fpsi = st.F;

  s.Astar_u = Mat::Zero(l, l);
  s.Astar_spsi = Mat::Zero(l, l);
  const Mat zs = Mat(sys.z_star);
  for (Index i = 0; i < l; ++i) {
    // (e_i kron I_m) u*
    s.Astar_u.col(i) = s.DJ * kron_vec(basis(l, i).col(0), sys.u_star);
    // diag_l(e_i kron I_k) s*_psi
    s.Astar_spsi.col(i) = st.H * bilinear_psi_signal(basis(l, i).col(0), s.s_psi_star, kp);
  }
  s.Hpsi_star = st.H * block_diag_repeat(kron(zs, Mat::Identity(kp, kp)), l);
  s.calA = sys.A0 + st.By + s.Astar_u + s.Astar_spsi;
  s.calB = sys.B0 + sys.phi.J + s.DJ * kron(zs, Mat::Identity(m, m));
  return s;
}

Vec shifted_state(const Inn& net, const Mat& F, const Mat& G, const Vec& v_star, const Vec& s_star,
                  const Vec& u_tilde) {
  if (F.rows() == 0) return Vec::Zero(0);
  // With s = s~ + s*, the shifted equation reads s = xi(F s + G u~ + v* - F s*).
  Inn shifted = net;
  shifted.F = F;
  return solve_implicit_state(shifted, G * u_tilde + v_star - F * s_star) - s_star;
}

Vec shifted_step(const ShiftedLfr& lfr, const Vec& z_tilde, const Vec& u_tilde) {
  const Vec s_phi = shifted_state(lfr.phi_net, lfr.Fphi, lfr.Gphi, lfr.v_phi_star, lfr.s_phi_star, u_tilde);
  const Vec s_psi = shifted_state(lfr.psi_net, lfr.Fpsi, lfr.Gpsi, lfr.v_psi_star, lfr.s_psi_star, u_tilde);
  Vec q(lfr.dims.mc());
  q << kron_vec(z_tilde, u_tilde), bilinear_psi_signal(z_tilde, s_psi, lfr.dims.k_psi), s_phi, s_psi;
  return lfr.calA * z_tilde + lfr.calB * u_tilde + lfr.Bq() * q;
}

}  // namespace nfl
