#include "nfl/affine.hpp"

#include <algorithm>
#include <map>

namespace nfl {

namespace {

using Trip = Eigen::Triplet<double>;

SpMat sparse_of(const Mat& m) { return m.sparseView(0.0, 0.0); }

}  // namespace

AffineExpr::AffineExpr(Index rows, Index cols) : rows_(rows), cols_(cols), c_(Mat::Zero(rows, cols)) {}

AffineExpr::AffineExpr(const Mat& constant) : rows_(constant.rows()), cols_(constant.cols()), c_(constant) {}

void AffineExpr::add_term(int var, const SpMat& coeff) {
  if (coeff.rows() != rows_ || coeff.cols() != cols_) throw ShapeMismatch("affine term has wrong shape");
  auto it = std::lower_bound(terms_.begin(), terms_.end(), var,
                             [](const std::pair<int, SpMat>& t, int v) { return t.first < v; });
  if (it != terms_.end() && it->first == var) {
    it->second += coeff;
  } else {
    terms_.insert(it, {var, coeff});
  }
}

Mat AffineExpr::evaluate(const Vec& y) const {
  Mat out = c_;
  for (const auto& [v, s] : terms_) out += y(v) * Mat(s);
  return out;
}

AffineExpr AffineExpr::transpose() const {
  AffineExpr out(c_.transpose());
  out.terms_.reserve(terms_.size());
  for (const auto& [v, s] : terms_) out.terms_.emplace_back(v, SpMat(s.transpose()));
  return out;
}

AffineExpr AffineExpr::operator+(const AffineExpr& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw ShapeMismatch("affine sum: shape mismatch");
  AffineExpr out(c_ + o.c_);
  std::size_t i = 0, j = 0;
  while (i < terms_.size() || j < o.terms_.size()) {
    if (j == o.terms_.size() || (i < terms_.size() && terms_[i].first < o.terms_[j].first)) {
      out.terms_.push_back(terms_[i++]);
    } else if (i == terms_.size() || o.terms_[j].first < terms_[i].first) {
      out.terms_.push_back(o.terms_[j++]);
    } else {
      out.terms_.emplace_back(terms_[i].first, SpMat(terms_[i].second + o.terms_[j].second));
      ++i;
      ++j;
    }
  }
  return out;
}

AffineExpr AffineExpr::operator-() const { return *this * -1.0; }

AffineExpr AffineExpr::operator-(const AffineExpr& o) const { return *this + (-o); }

AffineExpr AffineExpr::operator*(double s) const {
  AffineExpr out(c_ * s);
  out.terms_.reserve(terms_.size());
  for (const auto& [v, m] : terms_) out.terms_.emplace_back(v, SpMat(m * s));
  return out;
}

AffineExpr operator*(const Mat& d, const AffineExpr& e) {
  if (d.cols() != e.rows_) throw ShapeMismatch("affine product: inner dimension mismatch");
  AffineExpr out(d * e.c_);
  const SpMat ds = sparse_of(d);
  out.terms_.reserve(e.terms_.size());
  for (const auto& [v, s] : e.terms_) {
    SpMat p = (ds * s).pruned();
    if (p.nonZeros() > 0) out.terms_.emplace_back(v, std::move(p));
  }
  return out;
}

AffineExpr operator*(const AffineExpr& e, const Mat& d) {
  if (e.cols_ != d.rows()) throw ShapeMismatch("affine product: inner dimension mismatch");
  AffineExpr out(e.c_ * d);
  const SpMat ds = sparse_of(d);
  out.terms_.reserve(e.terms_.size());
  for (const auto& [v, s] : e.terms_) {
    SpMat p = (s * ds).pruned();
    if (p.nonZeros() > 0) out.terms_.emplace_back(v, std::move(p));
  }
  return out;
}

AffineExpr kron(const Mat& k, const AffineExpr& e) {
  AffineExpr out(kron(k, e.c_));
  const Index r = e.rows_, c = e.cols_;
  for (const auto& [v, s] : e.terms_) {
    std::vector<Trip> trip;
    for (Index i = 0; i < k.rows(); ++i) {
      for (Index j = 0; j < k.cols(); ++j) {
        if (k(i, j) == 0.0) continue;
        for (int col = 0; col < s.outerSize(); ++col) {
          for (SpMat::InnerIterator it(s, col); it; ++it) {
            trip.emplace_back(i * r + it.row(), j * c + it.col(), k(i, j) * it.value());
          }
        }
      }
    }
    if (trip.empty()) continue;
    SpMat m(out.rows_, out.cols_);
    m.setFromTriplets(trip.begin(), trip.end());
    out.terms_.emplace_back(v, std::move(m));
  }
  return out;
}

AffineExpr assemble_blocks(const ExprGrid& grid, const std::vector<Index>& heights, const std::vector<Index>& widths) {
  if (grid.size() != heights.size()) throw ShapeMismatch("block grid: row count mismatch");
  Index rows = 0, cols = 0;
  for (Index h : heights) rows += h;
  for (Index w : widths) cols += w;
  Mat constant = Mat::Zero(rows, cols);
  std::map<int, std::vector<Trip>> trips;
  Index r0 = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i].size() != widths.size()) throw ShapeMismatch("block grid: column count mismatch");
    Index c0 = 0;
    for (std::size_t j = 0; j < widths.size(); ++j) {
      const auto& cell = grid[i][j];
      if (cell) {
        if (cell->rows() != heights[i] || cell->cols() != widths[j]) {
          throw ShapeMismatch("block grid: block " + std::to_string(i) + "," + std::to_string(j) + " has shape " +
                              std::to_string(cell->rows()) + "x" + std::to_string(cell->cols()) + ", expected " +
                              std::to_string(heights[i]) + "x" + std::to_string(widths[j]));
        }
        constant.block(r0, c0, heights[i], widths[j]) = cell->constant();
        for (const auto& [v, s] : cell->terms()) {
          auto& t = trips[v];
          for (int col = 0; col < s.outerSize(); ++col) {
            for (SpMat::InnerIterator it(s, col); it; ++it) t.emplace_back(r0 + it.row(), c0 + it.col(), it.value());
          }
        }
      }
      c0 += widths[j];
    }
    r0 += heights[i];
  }
  AffineExpr out(constant);
  for (auto& [v, t] : trips) {
    SpMat m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    out.add_term(v, m);
  }
  return out;
}

AffineExpr hstack(const std::vector<AffineExpr>& parts) {
  if (parts.empty()) return AffineExpr(0, 0);
  ExprGrid grid(1);
  std::vector<Index> widths;
  for (const auto& p : parts) {
    grid[0].emplace_back(p);
    widths.push_back(p.cols());
  }
  return assemble_blocks(grid, {parts.front().rows()}, widths);
}

AffineExpr vstack(const std::vector<AffineExpr>& parts) {
  if (parts.empty()) return AffineExpr(0, 0);
  ExprGrid grid;
  std::vector<Index> heights;
  for (const auto& p : parts) {
    grid.push_back({p});
    heights.push_back(p.rows());
  }
  return assemble_blocks(grid, heights, {parts.front().cols()});
}

AffineExpr block_diag(const std::vector<AffineExpr>& parts) {
  const std::size_t n = parts.size();
  ExprGrid grid(n, std::vector<std::optional<AffineExpr>>(n));
  std::vector<Index> heights, widths;
  for (std::size_t i = 0; i < n; ++i) {
    grid[i][i] = parts[i];
    heights.push_back(parts[i].rows());
    widths.push_back(parts[i].cols());
  }
  return assemble_blocks(grid, heights, widths);
}

// ---------------------------------------------------------------------------

VariableSet::Handle VariableSet::symmetric(const std::string& name, Index n) {
  Handle h{name, Kind::Symmetric, n, n, n_, static_cast<int>(n * (n + 1) / 2)};
  n_ += h.count;
  return h;
}

VariableSet::Handle VariableSet::diagonal(const std::string& name, Index n) {
  Handle h{name, Kind::Diagonal, n, n, n_, static_cast<int>(n)};
  n_ += h.count;
  return h;
}

VariableSet::Handle VariableSet::scalar_identity(const std::string& name, Index n) {
  Handle h{name, Kind::ScalarIdentity, n, n, n_, n > 0 ? 1 : 0};
  n_ += h.count;
  return h;
}

VariableSet::Handle VariableSet::full(const std::string& name, Index rows, Index cols) {
  Handle h{name, Kind::Full, rows, cols, n_, static_cast<int>(rows * cols)};
  n_ += h.count;
  return h;
}

AffineExpr VariableSet::expr(const Handle& h) const {
  AffineExpr e(h.rows, h.cols);
  int v = h.first;
  auto unit = [&](std::vector<Trip> t) {
    SpMat m(h.rows, h.cols);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  };
  switch (h.kind) {
    case Kind::Symmetric:
      for (Index a = 0; a < h.rows; ++a) {
        for (Index b = a; b < h.rows; ++b) {
          if (a == b) {
            e.add_term(v++, unit({Trip(a, a, 1.0)}));
          } else {
            e.add_term(v++, unit({Trip(a, b, 1.0), Trip(b, a, 1.0)}));
          }
        }
      }
      break;
    case Kind::Diagonal:
      for (Index a = 0; a < h.rows; ++a) e.add_term(v++, unit({Trip(a, a, 1.0)}));
      break;
    case Kind::ScalarIdentity: {
      if (h.count == 0) break;
      std::vector<Trip> t;
      for (Index a = 0; a < h.rows; ++a) t.emplace_back(a, a, 1.0);
      e.add_term(v++, unit(t));
      break;
    }
    case Kind::Full:
      for (Index a = 0; a < h.rows; ++a) {
        for (Index b = 0; b < h.cols; ++b) e.add_term(v++, unit({Trip(a, b, 1.0)}));
      }
      break;
  }
  return e;
}

Mat VariableSet::value(const Handle& h, const Vec& y) const { return expr(h).evaluate(y); }

void VariableSet::set_value(const Handle& h, const Mat& m, Vec& y) const {
  require_shape(m, h.rows, h.cols, "variable " + h.name);
  int v = h.first;
  switch (h.kind) {
    case Kind::Symmetric:
      for (Index a = 0; a < h.rows; ++a) {
        for (Index b = a; b < h.rows; ++b) y(v++) = a == b ? m(a, a) : 0.5 * (m(a, b) + m(b, a));
      }
      break;
    case Kind::Diagonal:
      for (Index a = 0; a < h.rows; ++a) y(v++) = m(a, a);
      break;
    case Kind::ScalarIdentity:
      if (h.count > 0) y(v) = m.diagonal().mean();
      break;
    case Kind::Full:
      for (Index a = 0; a < h.rows; ++a) {
        for (Index b = 0; b < h.cols; ++b) y(v++) = m(a, b);
      }
      break;
  }
}

Vec trace_objective(const AffineExpr& e, int num_vars) {
  Vec b = Vec::Zero(num_vars);
  for (const auto& [v, s] : e.terms()) {
    double t = 0.0;
    for (int col = 0; col < s.outerSize(); ++col) {
      for (SpMat::InnerIterator it(s, col); it; ++it) {
        if (it.row() == it.col()) t += it.value();
      }
    }
    b(v) = t;
  }
  return b;
}

int add_lmi(SdpProblem& sdp, const AffineExpr& e, int sense, double margin) {
  if (e.rows() != e.cols()) throw ShapeMismatch("lmi expression is not square");
  const Index n = e.rows();
  // Z = sense * E(y) - margin I = C - sum_v y_v A_v
  Mat C = symmetrize(sense * e.constant()) - margin * Mat::Identity(n, n);
  const int blk = sdp.add_block(n, false, C);
  if (static_cast<Index>(sdp.A.size()) < sdp.b.size()) sdp.A.resize(static_cast<std::size_t>(sdp.b.size()));
  for (const auto& [v, s] : e.terms()) {
    SpMat a = (SpMat(s * (-0.5 * sense)) + SpMat(SpMat(s.transpose()) * (-0.5 * sense))).pruned();
    if (a.nonZeros() == 0) continue;
    sdp.A[v].push_back({blk, std::move(a)});
  }
  return blk;
}

int add_diag_nonneg(SdpProblem& sdp, const AffineExpr& e, double margin) {
  if (e.rows() != e.cols()) throw ShapeMismatch("diagonal constraint is not square");
  const Index n = e.rows();
  Mat C = e.constant().diagonal() - Vec::Constant(n, margin);
  const int blk = sdp.add_block(n, true, C);
  if (static_cast<Index>(sdp.A.size()) < sdp.b.size()) sdp.A.resize(static_cast<std::size_t>(sdp.b.size()));
  for (const auto& [v, s] : e.terms()) {
    std::vector<Trip> t;
    for (int col = 0; col < s.outerSize(); ++col) {
      for (SpMat::InnerIterator it(s, col); it; ++it) {
        if (it.row() != it.col()) throw Error("diagonal constraint has off-diagonal terms");
        t.emplace_back(it.row(), 0, -it.value());
      }
    }
    SpMat a(n, 1);
    a.setFromTriplets(t.begin(), t.end());
    sdp.A[v].push_back({blk, std::move(a)});
  }
  return blk;
}

}  // namespace nfl
