#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "winoforms/gradcore/tape.hpp"

namespace winoforms {

namespace detail {

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

inline double finite_or_throw(double v) {
  if (!std::isfinite(v)) throw Error("grad_check: function value is not finite");
  return v;
}

}  // namespace detail

// Scalar function of one tensor argument, expressed on a tape.
using ScalarGraph = std::function<Var(Tape<double>&, Var)>;

// Max over coordinates of |analytic - numeric| / max(1, |analytic|), where
// numeric is the central difference with the given step.
inline double grad_check(const ScalarGraph& f, const Tensor<double>& point, double step) {
  if (!(step > 0.0)) throw Error("grad_check: step must be positive");
  Tape<double> tape;
  Var x = tape.leaf(point);
  Var y = f(tape, x);
  detail::finite_or_throw(tape.value(y).item());
  tape.backward(y);
  const Tensor<double> analytic = tape.grad(x);

  auto eval = [&](const Tensor<double>& at) {
    Tape<double> t;
    return detail::finite_or_throw(t.value(f(t, t.leaf(at))).item());
  };
  double worst = 0.0;
  Tensor<double> probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = eval(probe);
    probe[i] = point[i] - step;
    const double down = eval(probe);
    probe[i] = point[i];
    worst = std::max(worst, detail::relative_error(analytic[i], (up - down) / (2.0 * step)));
  }
  return worst;
}

// Same check over every coordinate of every parameter in `params`; `loss`
// builds the scalar objective on a fresh tape each time it is called.
inline double grad_check_parameters(std::span<Parameter<double>* const> params,
                                    const std::function<Var(Tape<double>&)>& loss,
                                    double step) {
  if (!(step > 0.0)) throw Error("grad_check: step must be positive");
  for (auto* p : params) p->zero_grad();
  {
    Tape<double> tape;
    Var y = loss(tape);
    detail::finite_or_throw(tape.value(y).item());
    tape.backward(y);
  }
  auto eval = [&] {
    Tape<double> t;
    return detail::finite_or_throw(t.value(loss(t)).item());
  };
  double worst = 0.0;
  for (auto* p : params) {
    auto values = p->value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = eval();
      values[i] = saved - step;
      const double down = eval();
      values[i] = saved;
      worst = std::max(worst, detail::relative_error(p->grad[i], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

}  // namespace winoforms
