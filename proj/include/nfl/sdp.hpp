#pragma once

#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "nfl/matcore.hpp"

namespace nfl {

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// Dual-form semidefinite program over free variables y:
///
///   maximize b^T y  subject to  Z_k = C_k - sum_i y_i A_{i,k} >= 0 for every block k.
///
/// LP blocks are diagonal; their C and A entries are stored as column vectors.
struct SdpBlock {
  Index dim = 0;
  bool diagonal = false;
  Mat C;
};

struct SdpEntry {
  int block = 0;
  SpMat A;  // symmetric dim x dim, or dim x 1 for diagonal blocks
};

struct SdpProblem {
  std::vector<SdpBlock> blocks;
  std::vector<std::vector<SdpEntry>> A;  // A[i] lists the nonzero blocks of variable i
  Vec b;

  Index num_vars() const { return b.size(); }
  int add_block(Index dim, bool diagonal, Mat C);
  void validate() const;
};

enum class SdpStatus { Optimal, Infeasible, NumericalFailure, MaxIterations };

std::string to_string(SdpStatus s);

enum class SchurKernel { Serial, Parallel };

struct SdpSettings {
  int max_iter = 100;
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  double step_factor = 0.95;
  SchurKernel kernel = SchurKernel::Parallel;
  bool verbose = false;
};

struct SdpResult {
  SdpStatus status = SdpStatus::NumericalFailure;
  Vec y;
  std::vector<Mat> X;
  std::vector<Mat> Z;
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  double rel_gap = 0.0;
  double primal_infeas = 0.0;
  double dual_infeas = 0.0;
  int iterations = 0;
  std::string message;
};

SdpResult solve_sdp(const SdpProblem& problem, const SdpSettings& settings = {});

/// Precomputed operator data shared by the Schur kernels.
class SdpOperator {
 public:
  explicit SdpOperator(const SdpProblem& problem);

  /// M_ij = <A_i, X A_j Z^{-1}> summed over blocks. Zinv holds block inverses.
  Mat schur_serial(const std::vector<Mat>& X, const std::vector<Mat>& Zinv) const;
  Mat schur_parallel(const std::vector<Mat>& X, const std::vector<Mat>& Zinv) const;

  /// (<A_i, W>)_i
  Vec apply(const std::vector<Mat>& W) const;
  /// sum_i y_i A_i, per block
  std::vector<Mat> adjoint(const Vec& y) const;

  Index num_vars() const { return static_cast<Index>(problem_->b.size()); }

 private:
  struct Dyad {
    Index s;
    std::vector<std::pair<Index, double>> a;  // sparse vector
  };
  struct Nz {
    Index row, col;
    double val;
  };
  struct BlockTerms {
    std::vector<Index> start;  // per variable in processing order, offsets into nz
    std::vector<Nz> nz;        // lower-triangle (row >= col) entries grouped by variable
    std::vector<std::vector<Dyad>> dyads;
  };

  const SdpProblem* problem_;
  std::vector<Index> order_;  // variables sorted by dyad count
  std::vector<BlockTerms> sdp_terms_;
  std::vector<SpMat> lp_terms_;  // per block: num_vars x dim
};

}  // namespace nfl
