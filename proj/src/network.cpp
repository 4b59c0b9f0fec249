#include "mfd3/network.hpp"

#include <cmath>
#include <string>

#include "mfd3/special_functions.hpp"

namespace mfd3 {

void NetworkState::validate() const {
  if (d < 1) throw std::invalid_argument("NetworkState: d must be >= 1");
  if (first.width() < 1 || second.width() < 1)
    throw std::invalid_argument("NetworkState: widths must be >= 1");
  if (first.dim() != d)
    throw std::invalid_argument("NetworkState: first-layer dimension " + std::to_string(first.dim()) +
                                " != d = " + std::to_string(d));
  if (second.b.size() != second.w.size())
    throw std::invalid_argument("NetworkState: second-layer w and b sizes differ");
  if (!all_finite()) throw std::invalid_argument("NetworkState: non-finite parameter");
}

bool NetworkState::all_finite() const {
  return first.weights.allFinite() && second.w.allFinite() && second.b.allFinite();
}

NetworkState make_state(Matrix first_layer, Vector w2, Vector b2) {
  NetworkState state;
  state.d = static_cast<int>(first_layer.cols());
  state.first.weights = std::move(first_layer);
  state.second.w = std::move(w2);
  state.second.b = std::move(b2);
  state.validate();
  return state;
}

double f_star(const Eigen::Ref<const Vector>& x) { return f_star_of_norm(x.norm()); }

double forward_F(const NetworkState& state, const Eigen::Ref<const Vector>& x) {
  if (x.size() != state.d) throw std::invalid_argument("forward_F: input dimension mismatch");
  const Matrix& w = state.first.weights;
  double sum = 0.0;
  for (int i = 0; i < w.rows(); ++i) {
    const double dot = w.row(i).dot(x);
    if (dot > 0.0) sum += w.row(i).norm() * dot;
  }
  return sum / w.rows();
}

double second_layer_output(const SecondLayer& second, double first_output) {
  double sum = 0.0;
  for (int j = 0; j < second.width(); ++j) sum += relu(second.w[j] * first_output + second.b[j]);
  return sum / second.width();
}

double forward_f(const NetworkState& state, const Eigen::Ref<const Vector>& x) {
  return second_layer_output(state.second, forward_F(state, x));
}

Vector forward_F_batch(const NetworkState& state, const Batch& inputs) {
  if (inputs.cols() != state.d) throw std::invalid_argument("forward_F_batch: input dimension mismatch");
  const Matrix pre = inputs * state.first.weights.transpose();
  const Vector norms = state.first.norms();
  return pre.cwiseMax(0.0) * norms / static_cast<double>(state.first.width());
}

double alpha(const NetworkState& state) {
  const double mean_sq = state.first.weights.rowwise().squaredNorm().mean();
  return c_gamma(state.d) / std::sqrt(static_cast<double>(state.d)) * mean_sq;
}

InfiniteWidthView infinite_width_view(const NetworkState& state) {
  InfiniteWidthView view;
  view.alpha = alpha(state);
  view.w2_bar = state.second.w.mean();
  view.b2_bar = state.second.b.mean();
  view.second = state.second;
  return view;
}

double tilde_F(const InfiniteWidthView& view, const Eigen::Ref<const Vector>& x) {
  return view.alpha * x.norm();
}

double tilde_f(const InfiniteWidthView& view, const Eigen::Ref<const Vector>& x) {
  return second_layer_output(view.second, tilde_F(view, x));
}

double fbar(const NetworkState& state, const Eigen::Ref<const Vector>& x) {
  const double a = alpha(state);
  if (!(a >= 1e-300)) throw DegenerateStateError("fbar: alpha is zero");
  return forward_F(state, x) / a;
}

}  // namespace mfd3
