#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "psg/common.hpp"
#include "psg/model.hpp"

namespace psg {

/// Adam first/second moments, shape-matched to the parameters.
template <typename Scalar = double>
struct AdamState {
  ModelParams<Scalar> m;
  ModelParams<Scalar> v;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState make(const ModelParams<Scalar>& params) {
    AdamState s;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    return s;
  }
};

namespace detail {

template <typename Scalar>
std::vector<Matrix<Scalar>*> matrix_list(ModelParams<Scalar>& p) {
  std::vector<Matrix<Scalar>*> out;
  p.for_each([&](const std::string&, Matrix<Scalar>& m) { out.push_back(&m); });
  return out;
}

}  // namespace detail

/// Standard bias-corrected Adam update. Aborts on a non-finite gradient and
/// verifies the updated parameters stay finite.
template <typename Scalar = double>
void adam_step(ModelParams<Scalar>& params, const GradientTape<Scalar>& tape,
               AdamState<Scalar>& state, double learning_rate) {
  if (learning_rate <= 0)
    throw ConfigError("adam_step: learning rate must be positive");
  if (!tape.all_finite())
    throw TrainAbortError("adam_step: non-finite gradient");

  auto ps = detail::matrix_list(params);
  auto gs = detail::matrix_list(const_cast<GradientTape<Scalar>&>(tape));
  auto ms = detail::matrix_list(state.m);
  auto vs = detail::matrix_list(state.v);
  if (ps.size() != gs.size() || ps.size() != ms.size() || ps.size() != vs.size())
    throw ValidationError("adam_step: tape/state shape mismatch");

  ++state.step_count;
  Scalar b1 = Scalar(state.beta1), b2 = Scalar(state.beta2);
  Scalar corr1 = Scalar(1) - std::pow(b1, Scalar(state.step_count));
  Scalar corr2 = Scalar(1) - std::pow(b2, Scalar(state.step_count));
  Scalar lr = Scalar(learning_rate);
  Scalar eps = Scalar(state.epsilon);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Matrix<Scalar>& p = *ps[i];
    const Matrix<Scalar>& g = *gs[i];
    Matrix<Scalar>& m = *ms[i];
    Matrix<Scalar>& v = *vs[i];
    if (p.rows != g.rows || p.cols != g.cols)
      throw ValidationError("adam_step: gradient shape mismatch");
    for (std::size_t e = 0; e < p.data.size(); ++e) {
      m.data[e] = b1 * m.data[e] + (Scalar(1) - b1) * g.data[e];
      v.data[e] = b2 * v.data[e] + (Scalar(1) - b2) * g.data[e] * g.data[e];
      Scalar mhat = m.data[e] / corr1;
      Scalar vhat = v.data[e] / corr2;
      p.data[e] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  if (!params.all_finite())
    throw TrainAbortError("adam_step: parameters became non-finite");
}

}  // namespace psg
