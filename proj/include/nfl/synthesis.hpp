#pragma once

#include <string>

#include "nfl/affine.hpp"
#include "nfl/lfr.hpp"
#include "nfl/multiplier.hpp"
#include "nfl/sdp.hpp"
#include "nfl/system.hpp"

namespace nfl {

struct UnsupportedSlopeBounds : Error {
  using Error::Error;
};
struct Infeasible : Error {
  using Error::Error;
};
struct NumericalFailure : Error {
  using Error::Error;
};
struct ContainmentViolation : Error {
  using Error::Error;
};

enum class Objective { TraceP, Feasibility };
enum class MultiplierClass { Diagonal, Scalar };

std::string to_string(Objective o);
std::string to_string(MultiplierClass c);
Objective objective_from_string(const std::string& s);
MultiplierClass multiplier_class_from_string(const std::string& s);

struct SynthesisOptions {
  double eps = 1e-7;
  Objective objective = Objective::TraceP;
  MultiplierClass multiplier = MultiplierClass::Diagonal;
  /// Lower bound on multiplier variables and nu.
  double positivity_floor = 1e-9;
  SdpSettings sdp;
};

/// Handles of the synthesis decision variables.
struct DecisionVars {
  VariableSet set;
  VariableSet::Handle P, Lambda_m, Lambda_k, T_phi, T_psi, Lz, Lu, Lw, Lphi, Lpsi, nu;
};

DecisionVars declare_variables(const LfrDims& dims, MultiplierClass mc);

struct XMatrices {
  AffineExpr XAP, XCP, XBL, XBQ, XDL, XDQ;
  AffineExpr SL;  // S_L as an expression in the multiplier variables
  Mat SR;
};

XMatrices assemble_x_matrices(const ShiftedLfr& lfr, const RegionZ& region, const DecisionVars& v);

struct LmiProblem {
  LfrDims dims;
  double alpha = 0.0;
  double beta = 1.0;
  bool reduced = false;  // alpha == 0: trailing NN rows/columns removed
  RegionZ region;
  SynthesisOptions options;
  DecisionVars vars;
  AffineExpr left;
  AffineExpr right;

  /// Dual-form SDP with objective per options; Phase II.
  SdpProblem to_sdp() const;
  /// Feasibility test maximizing the minimum margin t under trace(left) <= dim.
  SdpProblem to_phase_one() const;
};

LmiProblem assemble_lmis(const ShiftedLfr& lfr, const RegionZ& region, const SynthesisOptions& opts = {});

struct SynthesisResult {
  LfrDims dims;
  double alpha = 0.0;
  double beta = 1.0;
  bool reduced = false;

  Mat P;
  Mat Kz, Ku, Kw, Kphi, Kpsi;
  Mat Lz, Lu, Lw, Lphi, Lpsi;
  Mat Lambda_m_t, Lambda_k_t;  // tilde (inverse) multipliers
  Vec T_phi_t, T_psi_t;
  double nu = 0.0;

  std::string status;      // "feasible" once every acceptance check passed
  std::string sdp_status;  // termination status reported by the SDP backend
  std::string phase;
  double left_min_eig = 0.0;
  double right_max_eig = 0.0;
  double trace_P = 0.0;
  int iterations = 0;
  double wall_time = 0.0;

  double eps = 1e-7;
  std::string objective;
  std::string multiplier;
  std::string backend;
  SdpSettings sdp;

  /// Multipliers in inverse form as used by the analysis inequality.
  MultiplierVars tilde_multipliers() const;
};

struct RawSolution {
  Vec y;
  SdpResult sdp;
  std::string phase;
};

/// Runs the SDP backend. Throws Infeasible or NumericalFailure.
RawSolution solve(const LmiProblem& problem);

SynthesisResult recover_gains(const LmiProblem& problem, const RawSolution& sol);

/// assemble_lmis + solve + recover_gains. Every `region` argument in this header is
/// expressed in shifted coordinates (see RegionZ::shifted_to).
SynthesisResult synthesize(const BilinearNfl& sys, const SynthesisOptions& opts = {});

/// Backend name from NFL_SYNTH_BACKEND (default "ipm"); throws Error for unknown names.
std::string selected_backend();

/// Closed-loop LFR matrices (A, B, C, D) under the recovered gains.
struct ClosedLoop {
  Mat A, B, C, D;
};

ClosedLoop closed_loop(const ShiftedLfr& lfr, const SynthesisResult& res);

/// Quadratic-inequality matrix N^T diag(-P, P, Pi~) N with N = [A^T C^T; -I 0; B^T D^T; 0 -I].
Mat primal_check_matrix(const ShiftedLfr& lfr, const RegionZ& region, const SynthesisResult& res);

/// Left and right LMI blocks evaluated at the result.
struct LmiResiduals {
  double left_min_eig = 0.0;
  double right_max_eig = 0.0;
};
LmiResiduals lmi_residuals(const ShiftedLfr& lfr, const RegionZ& region, const SynthesisResult& res);

/// max(|K_z P - L_z|, |K_q S_L - L_q|) elementwise.
double gain_relation_residual(const SynthesisResult& res, const RegionZ& region);

struct RoaCertificate {
  Mat P;
  double right_max_eig = 0.0;
  double worst_margin = 0.0;  // min region margin over sampled boundary points
  int samples = 0;
};

/// Samples the boundary of {z~ : z~^T P^{-1} z~ <= 1} and checks containment in the region.
RoaCertificate roa(const SynthesisResult& res, const RegionZ& region, int samples = 1000, unsigned seed = 42);

/// Same check for an arbitrary P; throws ContainmentViolation.
RoaCertificate check_containment(const Mat& P, const RegionZ& region, int samples, unsigned seed);

}  // namespace nfl
