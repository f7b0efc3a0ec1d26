#include "nfl/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include <omp.h>

namespace nfl {

int SdpProblem::add_block(Index dim, bool diagonal, Mat C) {
  SdpBlock blk;
  blk.dim = dim;
  blk.diagonal = diagonal;
  blk.C = std::move(C);
  blocks.push_back(std::move(blk));
  return static_cast<int>(blocks.size()) - 1;
}

void SdpProblem::validate() const {
  if (static_cast<Index>(A.size()) != b.size()) throw ShapeMismatch("sdp: constraint list and objective differ in length");
  for (const auto& blk : blocks) {
    if (blk.diagonal) {
      require_shape(blk.C, blk.dim, 1, "sdp diagonal block C");
    } else {
      require_shape(blk.C, blk.dim, blk.dim, "sdp block C");
      if (!is_symmetric(blk.C, 1e-10)) throw Error("sdp: block C is not symmetric");
    }
  }
  for (const auto& list : A) {
    for (const auto& e : list) {
      if (e.block < 0 || e.block >= static_cast<int>(blocks.size())) throw ShapeMismatch("sdp: bad block index");
      const auto& blk = blocks[e.block];
      if (e.A.rows() != blk.dim || e.A.cols() != (blk.diagonal ? 1 : blk.dim)) {
        throw ShapeMismatch("sdp: coefficient shape does not match its block");
      }
    }
  }
}

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal:
      return "optimal";
    case SdpStatus::Infeasible:
      return "infeasible";
    case SdpStatus::NumericalFailure:
      return "numerical_failure";
    case SdpStatus::MaxIterations:
      return "max_iterations";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Operator data

namespace {

// Greedy vertex cover of the symmetric pattern: every stored entry is assigned to
// exactly one pivot s, giving A = sum_s (a_s e_s^T + e_s a_s^T).
template <class Dyad>
std::vector<Dyad> dyad_split(const SpMat& A) {
  std::map<std::pair<Index, Index>, double> edges;
  for (int k = 0; k < A.outerSize(); ++k) {
    for (SpMat::InnerIterator it(A, k); it; ++it) {
      if (it.value() == 0.0) continue;
      const Index r = it.row(), c = it.col();
      if (r >= c) edges[{r, c}] = it.value();
    }
  }
  std::vector<Dyad> out;
  while (!edges.empty()) {
    std::map<Index, int> degree;
    for (const auto& [rc, v] : edges) {
      degree[rc.first]++;
      if (rc.first != rc.second) degree[rc.second]++;
    }
    Index best = degree.begin()->first;
    int best_deg = -1;
    for (const auto& [idx, d] : degree) {
      if (d > best_deg) {
        best = idx;
        best_deg = d;
      }
    }
    Dyad dy;
    dy.s = best;
    for (auto it = edges.begin(); it != edges.end();) {
      const Index r = it->first.first, c = it->first.second;
      if (r == best || c == best) {
        const Index other = (r == best) ? c : r;
        dy.a.emplace_back(other, r == c ? 0.5 * it->second : it->second);
        it = edges.erase(it);
      } else {
        ++it;
      }
    }
    out.push_back(std::move(dy));
  }
  return out;
}

}  // namespace

SdpOperator::SdpOperator(const SdpProblem& problem) : problem_(&problem) {
  problem.validate();
  const Index nv = problem.num_vars();
  const std::size_t nb = problem.blocks.size();

  // Per-variable dyads per SDP block.
  std::vector<std::vector<std::vector<Dyad>>> dyads(nb, std::vector<std::vector<Dyad>>(static_cast<std::size_t>(nv)));
  std::vector<std::size_t> dyad_count(static_cast<std::size_t>(nv), 0);
  for (Index i = 0; i < nv; ++i) {
    for (const auto& e : problem.A[i]) {
      if (problem.blocks[e.block].diagonal) continue;
      dyads[e.block][i] = dyad_split<Dyad>(e.A);
      dyad_count[i] += dyads[e.block][i].size();
    }
  }
  order_.resize(static_cast<std::size_t>(nv));
  std::iota(order_.begin(), order_.end(), Index{0});
  std::stable_sort(order_.begin(), order_.end(), [&](Index a, Index b) { return dyad_count[a] < dyad_count[b]; });

  sdp_terms_.resize(nb);
  lp_terms_.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    const auto& blk = problem.blocks[k];
    if (blk.diagonal) {
      std::vector<Eigen::Triplet<double>> trip;
      for (Index i = 0; i < nv; ++i) {
        for (const auto& e : problem.A[i]) {
          if (e.block != static_cast<int>(k)) continue;
          for (SpMat::InnerIterator it(e.A, 0); it; ++it) trip.emplace_back(i, it.row(), it.value());
        }
      }
      lp_terms_[k].resize(nv, blk.dim);
      lp_terms_[k].setFromTriplets(trip.begin(), trip.end());
      continue;
    }
    BlockTerms& bt = sdp_terms_[k];
    bt.start.assign(static_cast<std::size_t>(nv) + 1, 0);
    bt.dyads.resize(static_cast<std::size_t>(nv));
    for (Index pos = 0; pos < nv; ++pos) {
      const Index i = order_[pos];
      bt.start[pos] = static_cast<Index>(bt.nz.size());
      for (const auto& e : problem.A[i]) {
        if (e.block != static_cast<int>(k)) continue;
        for (int c = 0; c < e.A.outerSize(); ++c) {
          for (SpMat::InnerIterator it(e.A, c); it; ++it) {
            if (it.row() >= it.col() && it.value() != 0.0) bt.nz.push_back({it.row(), it.col(), it.value()});
          }
        }
      }
      bt.dyads[pos] = std::move(dyads[k][i]);
    }
    bt.start[nv] = static_cast<Index>(bt.nz.size());
  }
}

Vec SdpOperator::apply(const std::vector<Mat>& W) const {
  const Index nv = num_vars();
  Vec out = Vec::Zero(nv);
  for (Index i = 0; i < nv; ++i) {
    double acc = 0.0;
    for (const auto& e : problem_->A[i]) {
      const Mat& w = W[e.block];
      for (int c = 0; c < e.A.outerSize(); ++c) {
        for (SpMat::InnerIterator it(e.A, c); it; ++it) acc += it.value() * w(it.row(), it.col());
      }
    }
    out(i) = acc;
  }
  return out;
}

std::vector<Mat> SdpOperator::adjoint(const Vec& y) const {
  std::vector<Mat> out;
  for (const auto& blk : problem_->blocks) out.push_back(Mat::Zero(blk.dim, blk.diagonal ? 1 : blk.dim));
  for (Index i = 0; i < num_vars(); ++i) {
    if (y(i) == 0.0) continue;
    for (const auto& e : problem_->A[i]) {
      Mat& o = out[e.block];
      for (int c = 0; c < e.A.outerSize(); ++c) {
        for (SpMat::InnerIterator it(e.A, c); it; ++it) o(it.row(), it.col()) += y(i) * it.value();
      }
    }
  }
  return out;
}

namespace {

void add_lp_schur(const std::vector<SpMat>& lp_terms, const std::vector<SdpBlock>& blocks, const std::vector<Mat>& X,
                  const std::vector<Mat>& Zinv, Mat& M) {
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (!blocks[k].diagonal || lp_terms[k].nonZeros() == 0) continue;
    const Vec d = X[k].col(0).cwiseProduct(Zinv[k].col(0));
    const SpMat scaled = lp_terms[k] * d.asDiagonal();
    M += Mat(scaled * SpMat(lp_terms[k].transpose()));
  }
}

}  // namespace

Mat SdpOperator::schur_serial(const std::vector<Mat>& X, const std::vector<Mat>& Zinv) const {
  const Index nv = num_vars();
  Mat M = Mat::Zero(nv, nv);
  const auto& blocks = problem_->blocks;
  for (Index j = 0; j < nv; ++j) {
    for (const auto& ej : problem_->A[j]) {
      if (blocks[ej.block].diagonal) continue;
      const Mat B = X[ej.block] * Mat(ej.A) * Zinv[ej.block];
      for (Index i = 0; i < nv; ++i) {
        for (const auto& ei : problem_->A[i]) {
          if (ei.block != ej.block) continue;
          double acc = 0.0;
          for (int c = 0; c < ei.A.outerSize(); ++c) {
            for (SpMat::InnerIterator it(ei.A, c); it; ++it) acc += it.value() * B(it.col(), it.row());
          }
          M(i, j) += acc;
        }
      }
    }
  }
  add_lp_schur(lp_terms_, blocks, X, Zinv, M);
  return M;
}

Mat SdpOperator::schur_parallel(const std::vector<Mat>& X, const std::vector<Mat>& Zinv) const {
  const Index nv = num_vars();
  Mat M = Mat::Zero(nv, nv);
  const auto& blocks = problem_->blocks;

  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
#pragma omp parallel
  {
    RowMat UX, ZW;
#pragma omp for schedule(dynamic, 4)
    for (Index pj = 0; pj < nv; ++pj) {
      const Index j = order_[pj];
      for (std::size_t k = 0; k < blocks.size(); ++k) {
        if (blocks[k].diagonal) continue;
        const BlockTerms& bt = sdp_terms_[k];
        const auto& dys = bt.dyads[pj];
        if (dys.empty()) continue;
        const Mat& x = X[k];
        const Mat& zi = Zinv[k];
        const Index n = blocks[k].dim;
        const Index d = static_cast<Index>(dys.size());
        // X A_j Z^{-1} = sum_s (X a_s) (Z^{-1} e_s)^T + (X e_s) (Z^{-1} a_s)^T, so
        // entry (p, q) is UX.row(p) . ZW.row(q).
        UX.resize(n, 2 * d);
        ZW.resize(n, 2 * d);
        UX.setZero();
        ZW.setZero();
        for (Index t = 0; t < d; ++t) {
          const Dyad& dy = dys[t];
          for (const auto& [idx, v] : dy.a) {
            UX.col(t) += v * x.col(idx);
            ZW.col(d + t) += v * zi.col(idx);
          }
          UX.col(d + t) = x.col(dy.s);
          ZW.col(t) = zi.col(dy.s);
        }
        for (Index pi = pj; pi < nv; ++pi) {
          double acc = 0.0;
          for (Index t = bt.start[pi]; t < bt.start[pi + 1]; ++t) {
            const Nz& e = bt.nz[t];
            if (e.row == e.col) {
              acc += e.val * UX.row(e.row).dot(ZW.row(e.row));
            } else {
              acc += e.val * (UX.row(e.row).dot(ZW.row(e.col)) + UX.row(e.col).dot(ZW.row(e.row)));
            }
          }
          if (acc != 0.0) M(order_[pi], j) += acc;
        }
      }
    }
  }
  // Only one triangle (in processing order) was filled; mirror it.
  Mat full = M + M.transpose();
  for (Index p = 0; p < nv; ++p) full(order_[p], order_[p]) = M(order_[p], order_[p]);
  add_lp_schur(lp_terms_, blocks, X, Zinv, full);
  return full;
}

// ---------------------------------------------------------------------------
// Interior point method

namespace {

double inner(const std::vector<SdpBlock>& blocks, const std::vector<Mat>& a, const std::vector<Mat>& b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < blocks.size(); ++k) acc += a[k].cwiseProduct(b[k]).sum();
  return acc;
}

double fro_norm(const std::vector<Mat>& a) {
  double acc = 0.0;
  for (const auto& m : a) acc += m.squaredNorm();
  return std::sqrt(acc);
}

// Largest step t in (0, inf] with S + t dS >= 0; S must be positive definite.
double max_step(const SdpBlock& blk, const Mat& S, const Mat& dS) {
  if (blk.diagonal) {
    double t = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < blk.dim; ++i) {
      if (dS(i, 0) < 0.0) t = std::min(t, -S(i, 0) / dS(i, 0));
    }
    return t;
  }
  if (blk.dim == 0) return std::numeric_limits<double>::infinity();
  Eigen::LLT<Mat> llt(S);
  if (llt.info() != Eigen::Success) return 0.0;
  Mat T = llt.matrixL().solve(dS);
  T = llt.matrixL().solve(T.transpose()).transpose();
  const double lmin = Eigen::SelfAdjointEigenSolver<Mat>(symmetrize(T), Eigen::EigenvaluesOnly).eigenvalues()(0);
  return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

bool block_inverse(const SdpBlock& blk, const Mat& Z, Mat& Zinv) {
  if (blk.diagonal) {
    if ((Z.array() <= 0.0).any()) return false;
    Zinv = Z.cwiseInverse();
    return true;
  }
  if (blk.dim == 0) {
    Zinv = Z;
    return true;
  }
  Eigen::LLT<Mat> llt(Z);
  if (llt.info() != Eigen::Success) return false;
  Zinv = symmetrize(llt.solve(Mat::Identity(blk.dim, blk.dim)));
  return true;
}

// Per-block products used by the HKM direction; diagonal blocks act elementwise.
Mat mul3(const SdpBlock& blk, const Mat& a, const Mat& b, const Mat& c) {
  if (blk.diagonal) return a.cwiseProduct(b).cwiseProduct(c);
  return a * b * c;
}

Mat sym(const SdpBlock& blk, const Mat& a) { return blk.diagonal ? a : symmetrize(a); }

}  // namespace

SdpResult solve_sdp(const SdpProblem& problem, const SdpSettings& settings) {
  const SdpOperator op(problem);
  const auto& blocks = problem.blocks;
  const std::size_t nb = blocks.size();
  const Index nv = problem.num_vars();
  const Vec& b = problem.b;

  std::vector<Mat> C;
  Index n_total = 0;
  for (const auto& blk : blocks) {
    C.push_back(blk.C);
    n_total += blk.dim;
  }
  const double normC = fro_norm(C);
  const double normb = b.norm();

  // Starting point scaled to the data, as in standard infeasible-start codes.
  std::vector<Mat> X(nb), Z(nb), Zinv(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    const auto& blk = blocks[k];
    const double sq = std::sqrt(static_cast<double>(std::max<Index>(blk.dim, 1)));
    double max_a = 0.0;
    double xi = std::max(10.0, sq);
    for (Index i = 0; i < nv; ++i) {
      for (const auto& e : problem.A[i]) {
        if (e.block != static_cast<int>(k)) continue;
        const double na = e.A.norm();
        max_a = std::max(max_a, na);
        xi = std::max(xi, sq * (1.0 + std::abs(b(i))) / (1.0 + na));
      }
    }
    const double eta = std::max({10.0, sq, max_a, blk.C.norm()});
    const Index cols = blk.diagonal ? 1 : blk.dim;
    X[k] = blk.diagonal ? Mat::Constant(blk.dim, 1, xi) : Mat(xi * Mat::Identity(blk.dim, cols));
    Z[k] = blk.diagonal ? Mat::Constant(blk.dim, 1, eta) : Mat(eta * Mat::Identity(blk.dim, cols));
  }
  Vec y = Vec::Zero(nv);

  SdpResult res;
  res.status = SdpStatus::MaxIterations;
  int stall = 0;
  for (int iter = 0; iter <= settings.max_iter; ++iter) {
    res.iterations = iter;
    const double mu = inner(blocks, X, Z) / static_cast<double>(std::max<Index>(n_total, 1));
    const Vec rp = b - op.apply(X);
    const std::vector<Mat> ATy = op.adjoint(y);
    std::vector<Mat> Rd(nb);
    for (std::size_t k = 0; k < nb; ++k) Rd[k] = C[k] - Z[k] - ATy[k];

    res.primal_obj = inner(blocks, C, X);
    res.dual_obj = b.dot(y);
    res.rel_gap = std::abs(res.primal_obj - res.dual_obj) / (1.0 + std::abs(res.primal_obj) + std::abs(res.dual_obj));
    res.primal_infeas = rp.norm() / (1.0 + normb);
    res.dual_infeas = fro_norm(Rd) / (1.0 + normC);
    if (settings.verbose) {
      std::fprintf(stderr, "%3d  pobj %+.8e  dobj %+.8e  gap %.2e  pinf %.2e  dinf %.2e  mu %.2e\n", iter,
                   res.primal_obj, res.dual_obj, res.rel_gap, res.primal_infeas, res.dual_infeas, mu);
    }
    if (!std::isfinite(res.primal_obj) || !std::isfinite(res.dual_obj)) {
      res.status = SdpStatus::NumericalFailure;
      res.message = "non-finite iterate";
      break;
    }
    if (res.rel_gap <= settings.gap_tol && res.primal_infeas <= settings.feas_tol &&
        res.dual_infeas <= settings.feas_tol) {
      res.status = SdpStatus::Optimal;
      break;
    }
    // Primal ray: X >= 0, A(X) ~ 0, <C, X> < 0 certifies that no y satisfies the LMIs.
    if (res.primal_obj < 0.0) {
      const double scale = -res.primal_obj;
      if ((b - rp).norm() <= 1e-8 * scale && scale > 1e8 * (1.0 + normb)) {
        res.status = SdpStatus::Infeasible;
        res.message = "primal improving ray";
        break;
      }
    }
    if (iter == settings.max_iter) break;

    bool ok = true;
    for (std::size_t k = 0; k < nb && ok; ++k) ok = block_inverse(blocks[k], Z[k], Zinv[k]);
    if (!ok) {
      res.status = SdpStatus::NumericalFailure;
      res.message = "dual slack lost definiteness";
      break;
    }
    Mat M = settings.kernel == SchurKernel::Parallel ? op.schur_parallel(X, Zinv) : op.schur_serial(X, Zinv);
    Eigen::LLT<Mat> llt(M);
    if (llt.info() != Eigen::Success) {
      const double reg = 1e-14 * std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
      M.diagonal().array() += reg;
      llt.compute(M);
      if (llt.info() != Eigen::Success) {
        res.status = SdpStatus::NumericalFailure;
        res.message = "Schur complement is not positive definite";
        break;
      }
    }

    // XRZ = X Rd Z^{-1}
    std::vector<Mat> XRZ(nb);
    for (std::size_t k = 0; k < nb; ++k) XRZ[k] = mul3(blocks[k], X[k], Rd[k], Zinv[k]);

    auto direction = [&](double sigma, const std::vector<Mat>* corr, Vec& dy, std::vector<Mat>& dX,
                         std::vector<Mat>& dZ) {
      std::vector<Mat> G(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        G[k] = sigma * mu * Zinv[k] - X[k] - XRZ[k];
        if (corr) G[k] -= (*corr)[k];
      }
      dy = llt.solve(Vec(rp - op.apply(G)));
      const std::vector<Mat> ATdy = op.adjoint(dy);
      dX.resize(nb);
      dZ.resize(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        dZ[k] = Rd[k] - ATdy[k];
        Mat d = sigma * mu * Zinv[k] - X[k] - mul3(blocks[k], X[k], dZ[k], Zinv[k]);
        if (corr) d -= (*corr)[k];
        dX[k] = sym(blocks[k], d);
        if (!blocks[k].diagonal) dZ[k] = symmetrize(dZ[k]);
      }
    };

    auto steps = [&](const std::vector<Mat>& dX, const std::vector<Mat>& dZ, double& ap, double& ad) {
      ap = std::numeric_limits<double>::infinity();
      ad = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < nb; ++k) {
        ap = std::min(ap, max_step(blocks[k], X[k], dX[k]));
        ad = std::min(ad, max_step(blocks[k], Z[k], dZ[k]));
      }
    };

    Vec dy;
    std::vector<Mat> dX, dZ;
    direction(0.0, nullptr, dy, dX, dZ);
    double ap = 0.0, ad = 0.0;
    steps(dX, dZ, ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double mu_aff = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      mu_aff += (X[k] + ap * dX[k]).cwiseProduct(Z[k] + ad * dZ[k]).sum();
    }
    mu_aff /= static_cast<double>(std::max<Index>(n_total, 1));
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    std::vector<Mat> corr(nb);
    for (std::size_t k = 0; k < nb; ++k) corr[k] = mul3(blocks[k], dX[k], dZ[k], Zinv[k]);
    direction(sigma, &corr, dy, dX, dZ);
    steps(dX, dZ, ap, ad);
    const double gamma = settings.step_factor;
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    if (!(ap > 0.0) || !(ad > 0.0)) {
      res.status = SdpStatus::NumericalFailure;
      res.message = "zero step length";
      break;
    }
    stall = (ap < 1e-6 && ad < 1e-6) ? stall + 1 : 0;
    if (stall >= 5) {
      res.status = SdpStatus::NumericalFailure;
      res.message = "stalled";
      break;
    }
    for (std::size_t k = 0; k < nb; ++k) {
      X[k] += ap * dX[k];
      Z[k] += ad * dZ[k];
    }
    y += ad * dy;
  }
  res.y = y;
  res.X = std::move(X);
  res.Z = std::move(Z);
  return res;
}

}  // namespace nfl
