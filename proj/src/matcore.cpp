#include "nfl/matcore.hpp"

#include <cmath>
#include <sstream>

namespace nfl {

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Mat block_diag(std::span<const Mat> blocks) {
  Index rows = 0;
  Index cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Mat out = Mat::Zero(rows, cols);
  Index r = 0;
  Index c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

Mat block_diag(std::initializer_list<Mat> blocks) {
  return block_diag(std::span<const Mat>(blocks.begin(), blocks.size()));
}

Mat block_diag_repeat(const Mat& block, Index copies) {
  std::vector<Mat> blocks(static_cast<std::size_t>(copies), block);
  return block_diag(blocks);
}

Mat vstack(std::span<const Mat> blocks) {
  if (blocks.empty()) return Mat(0, 0);
  const Index cols = blocks.front().cols();
  Index rows = 0;
  for (const auto& b : blocks) {
    if (b.cols() != cols) {
      std::ostringstream msg;
      msg << "vstack: column count " << b.cols() << " differs from " << cols;
      throw ShapeMismatch(msg.str());
    }
    rows += b.rows();
  }
  Mat out(rows, cols);
  Index r = 0;
  for (const auto& b : blocks) {
    out.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return out;
}

Mat vstack(std::initializer_list<Mat> blocks) {
  return vstack(std::span<const Mat>(blocks.begin(), blocks.size()));
}

Mat hstack(std::span<const Mat> blocks) {
  if (blocks.empty()) return Mat(0, 0);
  const Index rows = blocks.front().rows();
  Index cols = 0;
  for (const auto& b : blocks) {
    if (b.rows() != rows) {
      std::ostringstream msg;
      msg << "hstack: row count " << b.rows() << " differs from " << rows;
      throw ShapeMismatch(msg.str());
    }
    cols += b.cols();
  }
  Mat out(rows, cols);
  Index c = 0;
  for (const auto& b : blocks) {
    out.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  return out;
}

Mat hstack(std::initializer_list<Mat> blocks) {
  return hstack(std::span<const Mat>(blocks.begin(), blocks.size()));
}

Mat symmetrize(const Mat& s) { return 0.5 * (s + s.transpose()); }

namespace {

Vec sym_eigenvalues(const Mat& s) {
  if (s.rows() != s.cols()) throw ShapeMismatch("eigenvalues of a non-square matrix");
  if (!all_finite(s)) throw NonFinite("eigenvalues of a matrix with non-finite entries");
  Eigen::SelfAdjointEigenSolver<Mat> eig(symmetrize(s), Eigen::EigenvaluesOnly);
  return eig.eigenvalues();
}

}  // namespace

double min_eig(const Mat& s) {
  if (s.size() == 0) return std::numeric_limits<double>::infinity();
  return sym_eigenvalues(s).minCoeff();
}

double max_eig(const Mat& s) {
  if (s.size() == 0) return -std::numeric_limits<double>::infinity();
  return sym_eigenvalues(s).maxCoeff();
}

Mat solve_linear(const Mat& a, const Mat& b) {
  if (a.rows() != a.cols()) throw ShapeMismatch("solve_linear: matrix is not square");
  if (a.rows() != b.rows()) throw ShapeMismatch("solve_linear: right-hand side row count mismatch");
  if (a.rows() == 0) return Mat(0, b.cols());
  Eigen::PartialPivLU<Mat> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-12)) {
    std::ostringstream msg;
    msg << "solve_linear: reciprocal condition estimate " << rcond << " below 1e-12";
    throw Singular(msg.str());
  }
  return lu.solve(b);
}

Mat inverse(const Mat& a) {
  return solve_linear(a, Mat::Identity(a.rows(), a.cols()));
}

bool is_symmetric(const Mat& s, double rel_tol) {
  if (s.rows() != s.cols()) return false;
  if (s.size() == 0) return true;
  return norm_inf(s - s.transpose()) <= rel_tol * (1.0 + norm_inf(s));
}

bool all_finite(const Mat& m) { return m.allFinite(); }

double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double norm_inf(const Mat& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

Mat selector(Index l, Index i) {
  Mat e = Mat::Zero(l, l);
  e(i, i) = 1.0;
  return e;
}

Mat basis(Index l, Index i) {
  Mat e = Mat::Zero(l, 1);
  e(i, 0) = 1.0;
  return e;
}

void require_shape(const Mat& m, Index rows, Index cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream msg;
    msg << what << ": expected " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
    throw ShapeMismatch(msg.str());
  }
}

}  // namespace nfl
