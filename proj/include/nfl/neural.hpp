#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nfl/matcore.hpp"

namespace nfl {

struct MixedActivation : Error {
  using Error::Error;
};

enum class ActivationKind { Relu, Tanh, Sigmoid, Custom };

/// Elementwise slope-restricted nonlinearity with declared bounds [alpha, beta].
struct Activation {
  ActivationKind kind = ActivationKind::Relu;
  std::string name = "relu";
  double alpha = 0.0;
  double beta = 1.0;
  std::function<double(double)> fn;

  static Activation relu();
  static Activation tanh();
  static Activation sigmoid();
  /// Custom activations always carry explicit slope bounds; alpha == beta is rejected.
  static Activation custom(std::string name, double alpha, double beta, std::function<double(double)> fn);
  /// Looks up a built-in or registry activation by name. Registry names
  /// (sin, softsign, leaky_relu, hardtanh, identity, ...) need declared bounds.
  static Activation from_name(const std::string& name, double alpha, double beta);
  static Activation from_name(const std::string& name);

  double operator()(double x) const { return fn(x); }
  Vec apply(const Vec& v) const;

  bool same_as(const Activation& other) const;
};

struct Layer {
  Mat W;
  Vec b;
};

/// Feedforward network: hidden layers x_{l+1} = xi(W_l x_l + b_l) followed by an
/// affine output layer without activation.
struct Mlp {
  std::vector<Layer> layers;
  Activation activation = Activation::relu();

  Index input_dim() const;
  Index output_dim() const;
  /// Number of hidden layers L (layers.size() - 1).
  Index hidden_count() const;
  void validate() const;
};

/// Implicit network: s = xi(F s + G u + b_x), y = H s + J u + b_y.
struct Inn {
  Mat F;
  Mat G;
  Mat H;
  Mat J;
  Vec bx;
  Vec by;
  Activation activation = Activation::relu();
  bool wellposed_by_structure = false;
  /// Hidden widths ordered as the state is stacked (last hidden layer first).
  /// Only meaningful when wellposed_by_structure is set.
  std::vector<Index> block_sizes;

  Index state_dim() const { return F.rows(); }
  Index input_dim() const { return G.cols(); }
  Index output_dim() const { return H.rows(); }
  void validate() const;

  /// Network with no internal state: y = J u + b_y.
  static Inn affine(const Mat& J, const Vec& by, Activation act = Activation::relu());
  static Inn zero(Index input_dim, Index output_dim, Activation act = Activation::relu());
};

struct InnEval {
  Vec y;
  Vec s;
};

struct InnSolveOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  double damping = 0.5;
};

Inn mlp_to_inn(const Mlp& mlp);

Vec evaluate_mlp(const Mlp& mlp, const Vec& u);

/// Solves the implicit state equation for input `u`.
InnEval evaluate_inn(const Inn& inn, const Vec& u, const InnSolveOptions& opts = {});

/// Solves s = xi(F s + c) for a given offset c. Uses block back-substitution
/// when the structure flag is set, Picard iteration otherwise.
Vec solve_implicit_state(const Inn& inn, const Vec& c, const InnSolveOptions& opts = {});

struct InternalState {
  Vec s;
  Vec v;
};

InternalState internal_state_at(const Inn& inn, const Vec& u_star, const InnSolveOptions& opts = {});

}  // namespace nfl
