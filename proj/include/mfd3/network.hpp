// Finite-width mean-field learner
//   F(x) = E_{w ~ mu1} |w| relu(w . x),
//   f(x) = E_{(w2, b2) ~ mu2} relu(w2 F(x) + b2),
// with mu1, mu2 the empirical distributions of the neuron lists.
#pragma once

#include <stdexcept>

#include <Eigen/Core>

#include "mfd3/input_distribution.hpp"

namespace mfd3 {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Raised when a quantity normalised by alpha is requested for alpha ~ 0.
class DegenerateStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// m1 first-layer neurons, one per row of `weights` (m1 x d).
struct FirstLayer {
  Matrix weights;

  int width() const { return static_cast<int>(weights.rows()); }
  int dim() const { return static_cast<int>(weights.cols()); }
  Vector norms() const { return weights.rowwise().norm(); }
};

/// m2 second-layer neurons (w2_j, b2_j).
struct SecondLayer {
  Vector w;
  Vector b;

  int width() const { return static_cast<int>(w.size()); }
};

struct NetworkState {
  int d = 0;
  FirstLayer first;
  SecondLayer second;

  /// Throws std::invalid_argument unless widths >= 1, dimensions agree and
  /// every entry is finite.
  void validate() const;
  bool all_finite() const;
};

/// Builds a state from explicit neuron lists.
NetworkState make_state(Matrix first_layer, Vector w2, Vector b2);

/// alpha together with the second layer it is paired with.
struct InfiniteWidthView {
  double alpha = 0.0;
  double w2_bar = 0.0;
  double b2_bar = 0.0;
  SecondLayer second;
};

inline double relu(double z) { return z > 0.0 ? z : 0.0; }
/// relu'(0) := 0.
inline double relu_prime(double z) { return z > 0.0 ? 1.0 : 0.0; }

/// f*(x) = relu(1 - |x|).
double f_star(const Eigen::Ref<const Vector>& x);
inline double f_star_of_norm(double norm) { return relu(1.0 - norm); }

double forward_F(const NetworkState& state, const Eigen::Ref<const Vector>& x);
/// Second layer applied to a given first-layer output value.
double second_layer_output(const SecondLayer& second, double first_output);
double forward_f(const NetworkState& state, const Eigen::Ref<const Vector>& x);

/// Batched first-layer outputs F(x_i), one per row of `inputs`.
Vector forward_F_batch(const NetworkState& state, const Batch& inputs);

/// alpha = C_Gamma / sqrt(d) * E |w|^2.
double alpha(const NetworkState& state);
InfiniteWidthView infinite_width_view(const NetworkState& state);

double tilde_F(const InfiniteWidthView& view, const Eigen::Ref<const Vector>& x);
double tilde_f(const InfiniteWidthView& view, const Eigen::Ref<const Vector>& x);
inline double tilde_F_of_norm(const InfiniteWidthView& view, double norm) { return view.alpha * norm; }

/// F / alpha. Throws DegenerateStateError when alpha < 1e-300.
double fbar(const NetworkState& state, const Eigen::Ref<const Vector>& x);

}  // namespace mfd3
