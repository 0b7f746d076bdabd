#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lang2face/autodiff.hpp"

namespace lang2face {

// Central finite-difference validation of tape gradients, always in
// double precision. `build` must be a pure function of the inputs: it
// receives a fresh tape plus one leaf Var per input tensor and returns
// a scalar loss Var.
struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst;  // "input k, element i"
};

using BuildFn = std::function<Tape<double>::Var(
    Tape<double>&, const std::vector<Tape<double>::Var>&)>;

inline GradCheckResult check_gradients(const BuildFn& build,
                                       std::vector<Tensor<double>> inputs,
                                       double h = 1e-5) {
  std::vector<Tensor<double>> analytic(inputs.size());
  {
    Tape<double> tape;
    std::vector<Tape<double>::Var> vars;
    for (size_t k = 0; k < inputs.size(); ++k) {
      analytic[k] = Tensor<double>(inputs[k].shape);
      vars.push_back(tape.param(inputs[k], &analytic[k]));
    }
    auto loss = build(tape, vars);
    tape.backward(loss);
  }

  auto eval = [&](const std::vector<Tensor<double>>& in) {
    Tape<double> tape;
    std::vector<Tape<double>::Var> vars;
    for (const auto& t : in) vars.push_back(tape.constant(t));
    return tape.scalar(build(tape, vars));
  };

  GradCheckResult res;
  for (size_t k = 0; k < inputs.size(); ++k) {
    for (size_t i = 0; i < inputs[k].data.size(); ++i) {
      double orig = inputs[k].data[i];
      inputs[k].data[i] = orig + h;
      double fp = eval(inputs);
      inputs[k].data[i] = orig - h;
      double fm = eval(inputs);
      inputs[k].data[i] = orig;
      double fd = (fp - fm) / (2.0 * h);
      double ad = analytic[k].data[i];
      double abs_err = std::abs(ad - fd);
      double rel = abs_err / std::max({std::abs(ad), std::abs(fd), 1e-2});
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.max_abs_error = abs_err;
        res.worst = "input " + std::to_string(k) + ", element " + std::to_string(i);
      }
    }
  }
  return res;
}

}  // namespace lang2face
