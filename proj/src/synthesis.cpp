#include "nfl/synthesis.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>

namespace nfl {

std::string to_string(Objective o) { return o == Objective::TraceP ? "trace-p" : "feasibility"; }

std::string to_string(MultiplierClass c) { return c == MultiplierClass::Diagonal ? "diagonal" : "scalar"; }

Objective objective_from_string(const std::string& s) {
  if (s == "trace-p") return Objective::TraceP;
  if (s == "feasibility") return Objective::Feasibility;
  throw Error("unknown objective '" + s + "' (expected trace-p or feasibility)");
}

MultiplierClass multiplier_class_from_string(const std::string& s) {
  if (s == "diagonal") return MultiplierClass::Diagonal;
  if (s == "scalar") return MultiplierClass::Scalar;
  throw Error("unknown multiplier class '" + s + "' (expected scalar or diagonal)");
}

MultiplierVars SynthesisResult::tilde_multipliers() const {
  return {Lambda_m_t, Lambda_k_t, T_phi_t, T_psi_t};
}

DecisionVars declare_variables(const LfrDims& d, MultiplierClass mc) {
  DecisionVars v;
  v.P = v.set.symmetric("P", d.l);
  v.Lambda_m = v.set.symmetric("Lambda_m", d.m);
  v.Lambda_k = v.set.symmetric("Lambda_kpsi", d.k_psi);
  if (mc == MultiplierClass::Diagonal) {
    v.T_phi = v.set.diagonal("T_kphi", d.k_phi);
    v.T_psi = v.set.diagonal("T_lkpsi", d.l * d.k_psi);
  } else {
    v.T_phi = v.set.scalar_identity("T_kphi", d.k_phi);
    v.T_psi = v.set.scalar_identity("T_lkpsi", d.l * d.k_psi);
  }
  const auto q = d.q_sizes();
  v.Lz = v.set.full("L_z", d.m, d.l);
  v.Lu = v.set.full("L_u", d.m, q[0]);
  v.Lw = v.set.full("L_wpsi", d.m, q[1]);
  v.Lphi = v.set.full("L_phi", d.m, q[2]);
  v.Lpsi = v.set.full("L_psi", d.m, q[3]);
  v.nu = v.set.full("nu", 1, 1);
  return v;
}

namespace {

struct TildeExprs {
  AffineExpr SL, Qt, Rt;
};

TildeExprs tilde_exprs(const RegionInverse& ri, const LfrDims& d, const DecisionVars& v, const NnCoefficients& c) {
  const AffineExpr Lm = v.set.expr(v.Lambda_m);
  const AffineExpr Lk = v.set.expr(v.Lambda_k);
  const AffineExpr Tf = v.set.expr(v.T_phi);
  const AffineExpr Tp = v.set.expr(v.T_psi);
  const Mat Il = Mat::Identity(d.l, d.l);
  TildeExprs t;
  t.SL = block_diag(std::vector<AffineExpr>{kron(ri.Qt, Lm), kron(Il, kron(ri.Qt, Lk)), Tf, Tp});
  t.Qt = block_diag(std::vector<AffineExpr>{kron(ri.Qt, Lm), kron(Il, kron(ri.Qt, Lk)), Tf * c.q, Tp * c.q});
  t.Rt = block_diag(std::vector<AffineExpr>{kron(ri.Rt, Lm), kron(Il, kron(ri.Rt, Lk)), Tf * c.r, Tp * c.r});
  return t;
}

Mat nn_scaling(const LfrDims& d, double cq) {
  const auto q = d.q_sizes();
  Vec s(d.mc());
  s << Vec::Ones(q[0] + q[1]), Vec::Constant(q[2] + q[3], cq);
  return s.asDiagonal();
}

void check_slopes(const LfrDims& d, double alpha, double beta) {
  if (!(alpha < beta)) throw UnsupportedSlopeBounds("slope bounds require alpha < beta");
  if (d.k_phi + d.k_psi == 0) return;
  if (alpha * beta >= 0.0 && alpha != 0.0) {
    std::ostringstream msg;
    msg << "slope bounds [" << alpha << ", " << beta << "] are not supported: need alpha*beta < 0 or alpha = 0";
    throw UnsupportedSlopeBounds(msg.str());
  }
}

}  // namespace

XMatrices assemble_x_matrices(const ShiftedLfr& lfr, const RegionZ& region, const DecisionVars& v) {
  const LfrDims& d = lfr.dims;
  const double alpha = lfr.activation.alpha, beta = lfr.activation.beta;
  const RegionInverse ri = invert_region(region);
  const NnCoefficients c = nn_tilde_coefficients(alpha, beta);
  const TildeExprs t = tilde_exprs(ri, d, v, c);

  const AffineExpr P = v.set.expr(v.P);
  const AffineExpr Lz = v.set.expr(v.Lz);
  const AffineExpr Lq = hstack(std::vector<AffineExpr>{v.set.expr(v.Lu), v.set.expr(v.Lw), v.set.expr(v.Lphi),
                                                       v.set.expr(v.Lpsi)});
  const Mat Dpu = lfr.Dpu();
  XMatrices x;
  x.SL = t.SL;
  x.SR = s_right_factor(region, d, alpha, beta);
  x.XAP = lfr.calA * P + lfr.calB * Lz;
  x.XCP = Dpu * Lz;
  x.XBL = lfr.Bq() * t.SL + lfr.calB * Lq;
  x.XDL = lfr.Dpq() * t.SL + Dpu * Lq;
  const Mat scale = nn_scaling(d, c.q);
  x.XBQ = x.XBL * scale;
  x.XDQ = x.XDL * scale;
  return x;
}

LmiProblem assemble_lmis(const ShiftedLfr& lfr, const RegionZ& region, const SynthesisOptions& opts) {
  const LfrDims& d = lfr.dims;
  const double alpha = lfr.activation.alpha, beta = lfr.activation.beta;
  check_slopes(d, alpha, beta);
  if (region.dim() != d.l) throw ShapeMismatch("region dimension does not match the plant");

  LmiProblem pb;
  pb.dims = d;
  pb.alpha = alpha;
  pb.beta = beta;
  pb.options = opts;
  pb.reduced = (alpha == 0.0) && (d.k_phi + d.k_psi > 0);
  pb.region = region;
  pb.vars = declare_variables(d, opts.multiplier);
  const DecisionVars& v = pb.vars;

  const RegionInverse ri = invert_region(region);
  const NnCoefficients c = nn_tilde_coefficients(alpha, beta);
  const TildeExprs t = tilde_exprs(ri, d, v, c);
  XMatrices x = assemble_x_matrices(lfr, region, v);

  const Index l = d.l, nc = d.nc(), mc = d.mc();
  const auto q = d.q_sizes();
  const Index nq = pb.reduced ? q[0] + q[1] : mc;
  AffineExpr XBQ = x.XBQ, XDQ = x.XDQ, Qt = t.Qt;
  if (pb.reduced) {
    const Mat keep = Mat::Identity(mc, nq);
    XBQ = x.XBQ * keep;
    XDQ = x.XDQ * keep;
    Qt = keep.transpose() * t.Qt * keep;
  }

  const AffineExpr P = v.set.expr(v.P);
  const AffineExpr BLSR = x.XBL * x.SR;
  const AffineExpr DLSR = x.XDL * x.SR;
  const AffineExpr mid = t.Rt - DLSR - DLSR.transpose();

  ExprGrid grid = {
      {P, -BLSR, x.XAP, XBQ},
      {-BLSR.transpose(), mid, x.XCP, XDQ},
      {x.XAP.transpose(), x.XCP.transpose(), P, std::nullopt},
      {XBQ.transpose(), XDQ.transpose(), std::nullopt, -Qt},
  };
  const std::vector<Index> sizes = {l, nc, l, nq};
  pb.left = assemble_blocks(grid, sizes, sizes);

  const AffineExpr nu = v.set.expr(v.nu);
  AffineExpr corner = kron(ri.Rt, nu) - AffineExpr(Mat::Identity(1, 1));
  ExprGrid rg = {
      {P + kron(ri.Qt, nu), kron(ri.St, nu) * -1.0},
      {kron(ri.St, nu).transpose() * -1.0, corner},
  };
  pb.right = assemble_blocks(rg, {l, 1}, {l, 1});
  return pb;
}

namespace {

void add_positivity(SdpProblem& sdp, const DecisionVars& v, double floor, int t_var) {
  auto with_t = [&](AffineExpr e) {
    if (t_var >= 0 && e.rows() > 0) {
      SpMat eye(e.rows(), e.cols());
      eye.setIdentity();
      e.add_term(t_var, SpMat(eye * -1.0));
    }
    return e;
  };
  if (v.Lambda_m.rows > 0) add_lmi(sdp, with_t(v.set.expr(v.Lambda_m)), 1, floor);
  if (v.Lambda_k.rows > 0) add_lmi(sdp, with_t(v.set.expr(v.Lambda_k)), 1, floor);
  if (v.T_phi.rows > 0) add_diag_nonneg(sdp, with_t(v.set.expr(v.T_phi)), floor);
  if (v.T_psi.rows > 0) add_diag_nonneg(sdp, with_t(v.set.expr(v.T_psi)), floor);
  add_diag_nonneg(sdp, with_t(v.set.expr(v.nu)), floor);
}

}  // namespace

SdpProblem LmiProblem::to_sdp() const {
  SdpProblem sdp;
  const int n = vars.set.size();
  sdp.b = options.objective == Objective::TraceP ? trace_objective(vars.set.expr(vars.P), n) : Vec(Vec::Zero(n));
  sdp.A.resize(static_cast<std::size_t>(n));
  add_lmi(sdp, left, 1, options.eps);
  add_lmi(sdp, right, -1, 0.0);
  add_positivity(sdp, vars, options.positivity_floor, -1);
  return sdp;
}

SdpProblem LmiProblem::to_phase_one() const {
  SdpProblem sdp;
  const int n = vars.set.size();
  const int t = n;
  sdp.b = Vec::Zero(n + 1);
  sdp.b(t) = 1.0;
  sdp.A.resize(static_cast<std::size_t>(n + 1));
  AffineExpr shifted = left;
  SpMat eye(left.rows(), left.cols());
  eye.setIdentity();
  shifted.add_term(t, SpMat(eye * -1.0));
  add_lmi(sdp, shifted, 1, 0.0);
  add_lmi(sdp, right, -1, 0.0);
  add_positivity(sdp, vars, 0.0, t);
  // trace(left) <= dim keeps the homogeneous part bounded.
  AffineExpr tr(Mat::Constant(1, 1, static_cast<double>(left.rows())));
  for (const auto& [var, s] : left.terms()) {
    double acc = 0.0;
    for (int col = 0; col < s.outerSize(); ++col) {
      for (SpMat::InnerIterator it(s, col); it; ++it) {
        if (it.row() == it.col()) acc += it.value();
      }
    }
    if (acc == 0.0) continue;
    SpMat m(1, 1);
    m.insert(0, 0) = -acc;
    tr.add_term(var, m);
  }
  tr = tr - AffineExpr(Mat::Constant(1, 1, left.constant().trace()));
  add_diag_nonneg(sdp, tr, 0.0);
  return sdp;
}

std::string selected_backend() {
  const char* env = std::getenv("NFL_SYNTH_BACKEND");
  const std::string name = env && *env ? env : "ipm";
  if (name != "ipm" && name != "ipm-serial") {
    throw Error("unknown NFL_SYNTH_BACKEND '" + name + "' (expected ipm or ipm-serial)");
  }
  return name;
}

namespace {

struct Acceptance {
  bool ok = false;
  double left = 0.0;
  double right = 0.0;
  std::string reason;
};

Acceptance accept(const LmiProblem& pb, const Vec& y) {
  Acceptance a;
  if (!y.allFinite()) {
    a.reason = "non-finite solution";
    return a;
  }
  const DecisionVars& v = pb.vars;
  a.left = min_eig(pb.left.evaluate(y));
  a.right = max_eig(pb.right.evaluate(y));
  const double lm = v.Lambda_m.rows > 0 ? min_eig(v.set.value(v.Lambda_m, y)) : 1.0;
  const double lk = v.Lambda_k.rows > 0 ? min_eig(v.set.value(v.Lambda_k, y)) : 1.0;
  const double tf = v.T_phi.rows > 0 ? v.set.value(v.T_phi, y).diagonal().minCoeff() : 1.0;
  const double tp = v.T_psi.rows > 0 ? v.set.value(v.T_psi, y).diagonal().minCoeff() : 1.0;
  const double nu = v.set.value(v.nu, y)(0, 0);
  std::ostringstream msg;
  if (a.left < 0.5 * pb.options.eps) msg << "left LMI min eigenvalue " << a.left << "; ";
  if (a.right > 1e-8) msg << "right LMI max eigenvalue " << a.right << "; ";
  if (!(lm > 0.0 && lk > 0.0 && tf > 0.0 && tp > 0.0 && nu > 0.0)) msg << "multiplier positivity; ";
  a.reason = msg.str();
  a.ok = a.reason.empty();
  return a;
}

}  // namespace

RawSolution solve(const LmiProblem& problem) {
  const std::string backend = selected_backend();
  SdpSettings settings = problem.options.sdp;
  settings.kernel = backend == "ipm-serial" ? SchurKernel::Serial : SchurKernel::Parallel;

  const SdpProblem sdp = problem.to_sdp();
  RawSolution sol;
  sol.sdp = solve_sdp(sdp, settings);
  sol.y = sol.sdp.y;
  sol.phase = "phase2";
  const Acceptance a2 = accept(problem, sol.y);
  if (a2.ok) return sol;

  const SdpProblem p1 = problem.to_phase_one();
  const SdpResult r1 = solve_sdp(p1, settings);
  const int n = problem.vars.set.size();
  const double t = r1.y.size() > n ? r1.y(n) : -1.0;
  if (r1.status == SdpStatus::Optimal || r1.status == SdpStatus::MaxIterations || r1.status == SdpStatus::Infeasible) {
    if (r1.status != SdpStatus::Infeasible && t > problem.options.eps) {
      const Vec y1 = r1.y.head(n);
      if (accept(problem, y1).ok) {
        sol.sdp = r1;
        sol.y = y1;
        sol.phase = "phase1";
        return sol;
      }
    } else {
      std::ostringstream msg;
      msg << "LMIs are infeasible: best normalized margin " << t << " <= " << problem.options.eps << " (phase II "
          << to_string(sol.sdp.status) << ": " << a2.reason << ")";
      throw Infeasible(msg.str());
    }
  }
  std::ostringstream msg;
  msg << "SDP backend failed: phase II " << to_string(sol.sdp.status) << " (" << a2.reason << "), phase I "
      << to_string(r1.status) << " with margin " << t;
  throw NumericalFailure(msg.str());
}

SynthesisResult recover_gains(const LmiProblem& pb, const RawSolution& sol) {
  const DecisionVars& v = pb.vars;
  const Vec& y = sol.y;
  SynthesisResult r;
  r.dims = pb.dims;
  r.alpha = pb.alpha;
  r.beta = pb.beta;
  r.reduced = pb.reduced;
  r.P = symmetrize(v.set.value(v.P, y));
  if (!(min_eig(r.P) > 1e-12)) throw Singular("recovered P is not positive definite");
  r.Lambda_m_t = symmetrize(v.set.value(v.Lambda_m, y));
  r.Lambda_k_t = symmetrize(v.set.value(v.Lambda_k, y));
  r.T_phi_t = v.set.value(v.T_phi, y).diagonal();
  r.T_psi_t = v.set.value(v.T_psi, y).diagonal();
  r.nu = v.set.value(v.nu, y)(0, 0);
  r.Lz = v.set.value(v.Lz, y);
  r.Lu = v.set.value(v.Lu, y);
  r.Lw = v.set.value(v.Lw, y);
  r.Lphi = v.set.value(v.Lphi, y);
  r.Lpsi = v.set.value(v.Lpsi, y);

  // K_z = L_z P^{-1}; K_q = L_q S_L^{-1}, where S_L = diag(Qz~ (x) Lm~, diag_l(Qz~ (x) Lk~), Tf~, Tp~).
  r.Kz = solve_linear(r.P, r.Lz.transpose()).transpose();
  CombinedMultiplier cm;
  factor_s_tilde(r.tilde_multipliers(), pb.region, pb.dims, pb.alpha, pb.beta, cm);
  const Mat Lq = hstack({r.Lu, r.Lw, r.Lphi, r.Lpsi});
  const Mat Kq = solve_linear(cm.SL.transpose(), Lq.transpose()).transpose();
  const auto q = pb.dims.q_sizes();
  r.Ku = Kq.leftCols(q[0]);
  r.Kw = Kq.middleCols(q[0], q[1]);
  r.Kphi = Kq.middleCols(q[0] + q[1], q[2]);
  r.Kpsi = Kq.rightCols(q[3]);

  r.status = "feasible";
  r.sdp_status = to_string(sol.sdp.status);
  r.phase = sol.phase;
  r.left_min_eig = min_eig(pb.left.evaluate(y));
  r.right_max_eig = max_eig(pb.right.evaluate(y));
  r.trace_P = r.P.trace();
  r.iterations = sol.sdp.iterations;
  r.eps = pb.options.eps;
  r.objective = to_string(pb.options.objective);
  r.multiplier = to_string(pb.options.multiplier);
  r.sdp = pb.options.sdp;
  return r;
}

SynthesisResult synthesize(const BilinearNfl& sys, const SynthesisOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const ShiftedLfr lfr = shift_lfr(sys);
  const LmiProblem pb = assemble_lmis(lfr, sys.region.shifted_to(sys.z_star), opts);
  const RawSolution sol = solve(pb);
  SynthesisResult r = recover_gains(pb, sol);
  r.backend = selected_backend();
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

ClosedLoop closed_loop(const ShiftedLfr& lfr, const SynthesisResult& res) {
  const Mat Kq = hstack({res.Ku, res.Kw, res.Kphi, res.Kpsi});
  const Mat Dpu = lfr.Dpu();
  ClosedLoop cl;
  cl.A = lfr.calA + lfr.calB * res.Kz;
  cl.B = lfr.Bq() + lfr.calB * Kq;
  cl.C = Dpu * res.Kz;
  cl.D = lfr.Dpq() + Dpu * Kq;
  return cl;
}

Mat primal_check_matrix(const ShiftedLfr& lfr, const RegionZ& region, const SynthesisResult& res) {
  const ClosedLoop cl = closed_loop(lfr, res);
  const LfrDims& d = lfr.dims;
  const Index l = d.l, mc = d.mc(), nc = d.nc();
  CombinedMultiplier cm;
  invert_combined(res.tilde_multipliers(), region, d, res.alpha, res.beta, cm);
  Mat N = Mat::Zero(2 * l + mc + nc, l + nc);
  N.block(0, 0, l, l) = cl.A.transpose();
  N.block(0, l, l, nc) = cl.C.transpose();
  N.block(l, 0, l, l) = -Mat::Identity(l, l);
  N.block(2 * l, 0, mc, l) = cl.B.transpose();
  N.block(2 * l, l, mc, nc) = cl.D.transpose();
  N.block(2 * l + mc, l, nc, nc) = -Mat::Identity(nc, nc);
  const Mat W = block_diag({Mat(-res.P), res.P, cm.full_tilde()});
  return symmetrize(N.transpose() * W * N);
}

LmiResiduals lmi_residuals(const ShiftedLfr& lfr, const RegionZ& region, const SynthesisResult& res) {
  SynthesisOptions opts;
  opts.eps = res.eps;
  opts.multiplier = multiplier_class_from_string(res.multiplier.empty() ? "diagonal" : res.multiplier);
  const LmiProblem pb = assemble_lmis(lfr, region, opts);
  const DecisionVars& v = pb.vars;
  Vec y = Vec::Zero(v.set.size());
  v.set.set_value(v.P, res.P, y);
  v.set.set_value(v.Lambda_m, res.Lambda_m_t, y);
  v.set.set_value(v.Lambda_k, res.Lambda_k_t, y);
  v.set.set_value(v.T_phi, Mat(res.T_phi_t.asDiagonal()), y);
  v.set.set_value(v.T_psi, Mat(res.T_psi_t.asDiagonal()), y);
  v.set.set_value(v.Lz, res.Lz, y);
  v.set.set_value(v.Lu, res.Lu, y);
  v.set.set_value(v.Lw, res.Lw, y);
  v.set.set_value(v.Lphi, res.Lphi, y);
  v.set.set_value(v.Lpsi, res.Lpsi, y);
  v.set.set_value(v.nu, Mat::Constant(1, 1, res.nu), y);
  return {min_eig(pb.left.evaluate(y)), max_eig(pb.right.evaluate(y))};
}

double gain_relation_residual(const SynthesisResult& res, const RegionZ& region) {
  CombinedMultiplier cm;
  factor_s_tilde(res.tilde_multipliers(), region, res.dims, res.alpha, res.beta, cm);
  const Mat Kq = hstack({res.Ku, res.Kw, res.Kphi, res.Kpsi});
  const Mat Lq = hstack({res.Lu, res.Lw, res.Lphi, res.Lpsi});
  return std::max(max_abs(res.Kz * res.P - res.Lz), max_abs(Kq * cm.SL - Lq));
}

RoaCertificate check_containment(const Mat& P, const RegionZ& region, int samples, unsigned seed) {
  RoaCertificate c;
  c.P = P;
  c.samples = samples;
  const Index l = P.rows();
  Eigen::LLT<Mat> llt(symmetrize(P));
  if (llt.info() != Eigen::Success) throw Singular("ROA matrix is not positive definite");
  const Mat L = llt.matrixL();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  c.worst_margin = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    Vec d(l);
    for (Index i = 0; i < l; ++i) d(i) = normal(rng);
    d.normalize();
    // z~ = L d satisfies z~^T P^{-1} z~ = 1.
    const Vec z = region.center + L * d;
    c.worst_margin = std::min(c.worst_margin, region_margin(region, z));
  }
  if (c.worst_margin < -1e-8) {
    std::ostringstream msg;
    msg << "ROA leaves the region: worst boundary margin " << c.worst_margin;
    throw ContainmentViolation(msg.str());
  }
  return c;
}

RoaCertificate roa(const SynthesisResult& res, const RegionZ& region, int samples, unsigned seed) {
  RoaCertificate c = check_containment(res.P, region, samples, seed);
  const RegionInverse ri = invert_region(region);
  Mat right(res.P.rows() + 1, res.P.rows() + 1);
  right << res.P + res.nu * ri.Qt, -res.nu * ri.St, -res.nu * ri.St.transpose(), res.nu * ri.Rt - Mat::Identity(1, 1);
  c.right_max_eig = max_eig(right);
  return c;
}

}  // namespace nfl
