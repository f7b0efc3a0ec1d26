#include "nfl/neural.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace nfl {

namespace {

double relu_fn(double x) { return x > 0.0 ? x : 0.0; }
double sigmoid_fn(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_bounds(const std::string& name, double alpha, double beta) {
  if (!std::isfinite(alpha) || !std::isfinite(beta)) {
    throw Error("activation " + name + ": slope bounds must be finite");
  }
  if (!(alpha < beta)) {
    std::ostringstream msg;
    msg << "activation " << name << ": slope bounds require alpha < beta (got " << alpha << ", " << beta << ")";
    throw Error(msg.str());
  }
}

using ScalarFn = std::function<double(double)>;

const std::map<std::string, ScalarFn>& registry() {
  static const std::map<std::string, ScalarFn> table = {
      {"identity", [](double x) { return x; }},
      {"sin", [](double x) { return std::sin(x); }},
      {"softsign", [](double x) { return x / (1.0 + std::abs(x)); }},
      {"leaky_relu", [](double x) { return x > 0.0 ? x : 0.01 * x; }},
      {"hardtanh", [](double x) { return std::clamp(x, -1.0, 1.0); }},
      {"softplus", [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }},
      {"elu", [](double x) { return x > 0.0 ? x : std::expm1(x); }},
  };
  return table;
}

}  // namespace

Activation Activation::relu() { return {ActivationKind::Relu, "relu", 0.0, 1.0, relu_fn}; }

Activation Activation::tanh() {
  return {ActivationKind::Tanh, "tanh", 0.0, 1.0, [](double x) { return std::tanh(x); }};
}

Activation Activation::sigmoid() { return {ActivationKind::Sigmoid, "sigmoid", 0.0, 0.25, sigmoid_fn}; }

Activation Activation::custom(std::string name, double alpha, double beta, std::function<double(double)> fn) {
  check_bounds(name, alpha, beta);
  if (!fn) throw Error("activation " + name + ": missing evaluator");
  return {ActivationKind::Custom, std::move(name), alpha, beta, std::move(fn)};
}

Activation Activation::from_name(const std::string& name) {
  if (name == "relu") return relu();
  if (name == "tanh") return tanh();
  if (name == "sigmoid") return sigmoid();
  throw Error("activation " + name + ": custom activations need declared slope bounds");
}

Activation Activation::from_name(const std::string& name, double alpha, double beta) {
  if (name == "relu" || name == "tanh" || name == "sigmoid") {
    Activation act = from_name(name);
    check_bounds(name, alpha, beta);
    act.alpha = alpha;
    act.beta = beta;
    return act;
  }
  auto it = registry().find(name);
  if (it == registry().end()) throw Error("unknown activation '" + name + "'");
  return custom(name, alpha, beta, it->second);
}

Vec Activation::apply(const Vec& v) const { return v.unaryExpr(fn); }

bool Activation::same_as(const Activation& other) const {
  return kind == other.kind && name == other.name && alpha == other.alpha && beta == other.beta;
}

Index Mlp::input_dim() const { return layers.empty() ? 0 : layers.front().W.cols(); }
Index Mlp::output_dim() const { return layers.empty() ? 0 : layers.back().W.rows(); }
Index Mlp::hidden_count() const { return static_cast<Index>(layers.size()) - 1; }

void Mlp::validate() const {
  if (layers.size() < 2) throw ShapeMismatch("mlp needs at least one hidden layer and an output layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (layer.b.size() != layer.W.rows()) {
      std::ostringstream msg;
      msg << "mlp layer " << i << ": bias length " << layer.b.size() << " does not match " << layer.W.rows() << " rows";
      throw ShapeMismatch(msg.str());
    }
    if (i > 0 && layer.W.cols() != layers[i - 1].W.rows()) {
      std::ostringstream msg;
      msg << "mlp layer " << i << ": " << layer.W.cols() << " inputs but previous layer has " << layers[i - 1].W.rows()
          << " outputs";
      throw ShapeMismatch(msg.str());
    }
    if (!all_finite(layer.W) || !layer.b.allFinite()) throw NonFinite("mlp layer has non-finite weights");
  }
}

void Inn::validate() const {
  const Index k = F.rows();
  require_shape(F, k, k, "inn F");
  require_shape(G, k, G.cols(), "inn G");
  require_shape(H, H.rows(), k, "inn H");
  require_shape(J, H.rows(), G.cols(), "inn J");
  if (bx.size() != k) throw ShapeMismatch("inn b_x length does not match state dimension");
  if (by.size() != H.rows()) throw ShapeMismatch("inn b_y length does not match output dimension");
  if (wellposed_by_structure) {
    Index total = 0;
    for (Index n : block_sizes) total += n;
    if (total != k) throw ShapeMismatch("inn block sizes do not sum to the state dimension");
  }
}

Inn Inn::affine(const Mat& J, const Vec& by, Activation act) {
  Inn inn;
  inn.F = Mat::Zero(0, 0);
  inn.G = Mat::Zero(0, J.cols());
  inn.H = Mat::Zero(J.rows(), 0);
  inn.J = J;
  inn.bx = Vec::Zero(0);
  inn.by = by;
  inn.activation = std::move(act);
  inn.wellposed_by_structure = true;
  return inn;
}

Inn Inn::zero(Index input_dim, Index output_dim, Activation act) {
  return affine(Mat::Zero(output_dim, input_dim), Vec::Zero(output_dim), std::move(act));
}

Inn mlp_to_inn(const Mlp& mlp) {
  mlp.validate();
  const Index L = mlp.hidden_count();
  const Index m = mlp.input_dim();

  // State s = [x_L; x_{L-1}; ...; x_1]; block j holds x_{L-j}, produced by W_{L-j-1}.
  std::vector<Index> sizes(static_cast<std::size_t>(L));
  std::vector<Index> offsets(static_cast<std::size_t>(L));
  Index k = 0;
  for (Index j = 0; j < L; ++j) {
    sizes[j] = mlp.layers[L - j - 1].W.rows();
    offsets[j] = k;
    k += sizes[j];
  }

  Inn inn;
  inn.F = Mat::Zero(k, k);
  inn.G = Mat::Zero(k, m);
  inn.bx = Vec::Zero(k);
  for (Index j = 0; j < L; ++j) {
    const Layer& layer = mlp.layers[L - j - 1];
    if (j + 1 < L) {
      inn.F.block(offsets[j], offsets[j + 1], sizes[j], sizes[j + 1]) = layer.W;
    } else {
      inn.G.middleRows(offsets[j], sizes[j]) = layer.W;
    }
    inn.bx.segment(offsets[j], sizes[j]) = layer.b;
  }
  const Layer& out = mlp.layers.back();
  inn.H = Mat::Zero(out.W.rows(), k);
  inn.H.leftCols(sizes[0]) = out.W;
  inn.J = Mat::Zero(out.W.rows(), m);
  inn.by = out.b;
  inn.activation = mlp.activation;
  inn.wellposed_by_structure = true;
  inn.block_sizes = sizes;
  return inn;
}

Vec evaluate_mlp(const Mlp& mlp, const Vec& u) {
  if (u.size() != mlp.input_dim()) throw ShapeMismatch("evaluate_mlp: input dimension mismatch");
  Vec x = u;
  const std::size_t n = mlp.layers.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    x = mlp.activation.apply(mlp.layers[i].W * x + mlp.layers[i].b);
  }
  return mlp.layers.back().W * x + mlp.layers.back().b;
}

Vec solve_implicit_state(const Inn& inn, const Vec& c, const InnSolveOptions& opts) {
  const Index k = inn.state_dim();
  if (c.size() != k) throw ShapeMismatch("implicit state offset has wrong length");
  if (k == 0) return Vec::Zero(0);

  if (inn.wellposed_by_structure) {
    // Strictly block upper triangular F: the last block depends only on c,
    // every earlier block only on blocks below it.
    Vec s = Vec::Zero(k);
    Index end = k;
    for (auto it = inn.block_sizes.rbegin(); it != inn.block_sizes.rend(); ++it) {
      const Index start = end - *it;
      const Index tail = k - end;
      Vec v = c.segment(start, *it);
      if (tail > 0) v.noalias() += inn.F.block(start, end, *it, tail) * s.tail(tail);
      s.segment(start, *it) = inn.activation.apply(v);
      end = start;
    }
    return s;
  }

  Vec s = Vec::Zero(k);
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const Vec target = inn.activation.apply(inn.F * s + c);
    const double res = (target - s).lpNorm<Eigen::Infinity>();
    if (!std::isfinite(res)) throw NoConvergence("implicit state iteration diverged");
    if (res <= opts.tol) return s;
    s = (1.0 - opts.damping) * s + opts.damping * target;
  }
  throw NoConvergence("implicit state iteration did not converge within max_iter");
}

InnEval evaluate_inn(const Inn& inn, const Vec& u, const InnSolveOptions& opts) {
  if (u.size() != inn.input_dim()) throw ShapeMismatch("evaluate_inn: input dimension mismatch");
  InnEval out;
  out.s = solve_implicit_state(inn, inn.G * u + inn.bx, opts);
  out.y = inn.H * out.s + inn.J * u + inn.by;
  return out;
}

InternalState internal_state_at(const Inn& inn, const Vec& u_star, const InnSolveOptions& opts) {
  if (u_star.size() != inn.input_dim()) throw ShapeMismatch("internal_state_at: input dimension mismatch");
  InternalState st;
  st.s = solve_implicit_state(inn, inn.G * u_star + inn.bx, opts);
  st.v = inn.F * st.s + inn.G * u_star + inn.bx;
  return st;
}

}  // namespace nfl
