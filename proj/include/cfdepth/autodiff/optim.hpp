#pragma once

#include "cfdepth/autodiff/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace cfd::ad {

/// Bias-corrected Adam.
template <typename Scalar>
struct AdamState {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Buffer<Scalar>> m;
  std::vector<Buffer<Scalar>> v;
};

/// One Adam update. Parameters missing from `grads` are left untouched. A
/// non-finite gradient raises NumericError naming the parameter, before
/// anything is modified.
template <typename Scalar>
void adam_step(ParameterList<Scalar>& params, const Gradients<Scalar>& grads, AdamState<Scalar>& state) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Buffer<Scalar>::Zero(p.value.data.size()));
      state.v.push_back(Buffer<Scalar>::Zero(p.value.data.size()));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state does not match parameter list");
  for (const auto& [handle, g] : grads) {
    if (handle < 0 || handle >= static_cast<int>(params.size())) throw InvalidInput("adam_step: unknown parameter handle");
    if (g.size() != params[handle].value.data.size()) {
      throw ShapeError("adam_step: gradient shape mismatch for " + params[handle].name);
    }
    if (!g.allFinite()) throw NumericError("non-finite gradient for parameter " + params[handle].name);
  }

  state.step += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const auto b1 = static_cast<Scalar>(state.beta1);
  const auto b2 = static_cast<Scalar>(state.beta2);
  for (const auto& [handle, g] : grads) {
    Buffer<Scalar>& m = state.m[handle];
    Buffer<Scalar>& v = state.v[handle];
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    const auto mhat = m / static_cast<Scalar>(c1);
    const auto vhat = v / static_cast<Scalar>(c2);
    params[handle].value.data -=
        static_cast<Scalar>(state.lr) * mhat / (vhat.sqrt() + static_cast<Scalar>(state.eps));
  }
}

/// Maximum relative error between reverse-mode gradients and central
/// differences, |a - cd| / max(|a|, |cd|, 1e-8), over sampled coordinates.
/// `program(tape, param_vars)` must build a scalar loss. max_coords <= 0
/// checks every coordinate of every parameter.
template <typename Program>
double grad_check(Program&& program, ParameterList<double>& params, double eps = 1e-5, int max_coords = 0,
                  std::uint64_t seed = 1) {
  Gradients<double> analytic;
  {
    Tape<double> tape;
    auto vars = tape.parameters(params);
    Var<double> loss = program(tape, vars);
    analytic = tape.backward(loss);
  }
  auto eval = [&]() {
    Tape<double> tape;
    auto vars = tape.parameters(params);
    return program(tape, vars).item();
  };

  std::vector<std::pair<int, Eigen::Index>> coords;
  for (int p = 0; p < static_cast<int>(params.size()); ++p) {
    for (Eigen::Index i = 0; i < params[p].value.data.size(); ++i) coords.emplace_back(p, i);
  }
  if (max_coords > 0 && static_cast<int>(coords.size()) > max_coords) {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < max_coords; ++i) {
      const auto j = i + static_cast<std::size_t>(rng() % (coords.size() - i));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(max_coords);
  }

  double worst = 0.0;
  for (const auto& [p, i] : coords) {
    double& x = params[p].value.data[i];
    const double saved = x;
    x = saved + eps;
    const double fp = eval();
    x = saved - eps;
    const double fm = eval();
    x = saved;
    const double cd = (fp - fm) / (2.0 * eps);
    const auto it = analytic.find(p);
    const double a = it == analytic.end() ? 0.0 : it->second[i];
    const double denom = std::max({std::abs(a), std::abs(cd), 1e-8});
    worst = std::max(worst, std::abs(a - cd) / denom);
  }
  return worst;
}

}  // namespace cfd::ad
