#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nfl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

// Error taxonomy shared by every module. Each error is its own type so that
// callers (and the CLI exit-code mapping) can dispatch on what went wrong.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct Singular : Error {
  using Error::Error;
};
struct NonFinite : Error {
  using Error::Error;
};
struct NoConvergence : Error {
  using Error::Error;
};

/// Standard Kronecker product, shape (a.rows*b.rows) x (a.cols*b.cols).
Mat kron(const Mat& a, const Mat& b);

/// Block-diagonal assembly. Zero-sized blocks are allowed and contribute nothing.
Mat block_diag(std::span<const Mat> blocks);
Mat block_diag(std::initializer_list<Mat> blocks);

/// diag_n(A): n copies of A on the diagonal.
Mat block_diag_repeat(const Mat& block, Index copies);

/// Vertical concatenation; throws ShapeMismatch when column counts differ.
Mat vstack(std::span<const Mat> blocks);
Mat vstack(std::initializer_list<Mat> blocks);

/// Horizontal concatenation; throws ShapeMismatch when row counts differ.
Mat hstack(std::span<const Mat> blocks);
Mat hstack(std::initializer_list<Mat> blocks);

/// (S + S^T) / 2.
Mat symmetrize(const Mat& s);

/// Smallest eigenvalue of the symmetric part of `s`.
double min_eig(const Mat& s);
/// Largest eigenvalue of the symmetric part of `s`.
double max_eig(const Mat& s);

/// Solves a * x = b for square `a`. Throws Singular when the reciprocal
/// condition estimate falls below 1e-12.
Mat solve_linear(const Mat& a, const Mat& b);

/// Inverse of a square matrix, with the same Singular contract as solve_linear.
Mat inverse(const Mat& a);

/// ||S - S^T||_inf <= tol * (1 + ||S||_inf).
bool is_symmetric(const Mat& s, double rel_tol = 1e-12);

bool all_finite(const Mat& m);

/// Max absolute entry; 0 for empty matrices.
double max_abs(const Mat& m);

/// Row-wise infinity norm (max absolute row sum).
double norm_inf(const Mat& m);

/// Unit selector E_i (l x l, single 1 at (i, i)).
Mat selector(Index l, Index i);

/// Standard basis vector e_i of R^l as an l x 1 matrix.
Mat basis(Index l, Index i);

void require_shape(const Mat& m, Index rows, Index cols, const std::string& what);

}  // namespace nfl
