#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nfl/matcore.hpp"
#include "nfl/sdp.hpp"

namespace nfl {

/// Matrix-valued affine function of scalar decision variables:
/// E(y) = C + sum_v y_v S_v with sparse coefficients S_v.
class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(Index rows, Index cols);
  explicit AffineExpr(const Mat& constant);

  static AffineExpr zero(Index rows, Index cols) { return AffineExpr(rows, cols); }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const Mat& constant() const { return c_; }
  const std::vector<std::pair<int, SpMat>>& terms() const { return terms_; }

  /// Adds y_var * coeff; merges with an existing term for the same variable.
  void add_term(int var, const SpMat& coeff);

  Mat evaluate(const Vec& y) const;
  AffineExpr transpose() const;

  AffineExpr operator+(const AffineExpr& o) const;
  AffineExpr operator-(const AffineExpr& o) const;
  AffineExpr operator-() const;
  AffineExpr operator*(double s) const;

  friend AffineExpr operator*(const Mat& d, const AffineExpr& e);
  friend AffineExpr operator*(const AffineExpr& e, const Mat& d);

  /// kron(K, E) for constant K.
  friend AffineExpr kron(const Mat& k, const AffineExpr& e);

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  Mat c_;
  std::vector<std::pair<int, SpMat>> terms_;  // sorted by variable
};

/// Grid assembly. Missing blocks (nullopt) are zero; row heights and column widths
/// are given explicitly so empty rows/cols are allowed.
using ExprGrid = std::vector<std::vector<std::optional<AffineExpr>>>;
AffineExpr assemble_blocks(const ExprGrid& grid, const std::vector<Index>& heights, const std::vector<Index>& widths);

AffineExpr hstack(const std::vector<AffineExpr>& parts);
AffineExpr vstack(const std::vector<AffineExpr>& parts);
AffineExpr block_diag(const std::vector<AffineExpr>& parts);

/// Registry of scalar decision variables grouped into named matrix variables.
class VariableSet {
 public:
  enum class Kind { Symmetric, Diagonal, ScalarIdentity, Full };

  struct Handle {
    std::string name;
    Kind kind = Kind::Full;
    Index rows = 0;
    Index cols = 0;
    int first = 0;
    int count = 0;
  };

  /// n x n symmetric; basis E_ab + E_ba (a != b) and E_aa.
  Handle symmetric(const std::string& name, Index n);
  /// n x n diagonal; basis E_aa.
  Handle diagonal(const std::string& name, Index n);
  /// n x n multiple of identity; one variable.
  Handle scalar_identity(const std::string& name, Index n);
  /// rows x cols unstructured.
  Handle full(const std::string& name, Index rows, Index cols);

  AffineExpr expr(const Handle& h) const;
  Mat value(const Handle& h, const Vec& y) const;
  /// Inverse of value(): scalar coordinates representing matrix `m`.
  void set_value(const Handle& h, const Mat& m, Vec& y) const;

  int size() const { return n_; }

 private:
  int n_ = 0;
};

/// Linear functional y -> trace(expr(y)) as an objective vector.
Vec trace_objective(const AffineExpr& e, int num_vars);

/// Appends `e(y) - margin I >= 0` (sense +1) or `e(y) <= 0` (sense -1) as an SDP block.
/// Symmetric expressions only. Returns the block index.
int add_lmi(SdpProblem& sdp, const AffineExpr& e, int sense, double margin = 0.0);

/// Appends elementwise `diag(e(y)) - margin >= 0` as a diagonal block (e must be diagonal).
int add_diag_nonneg(SdpProblem& sdp, const AffineExpr& e, double margin = 0.0);

}  // namespace nfl
