// SPDX-License-Identifier: Apache-2.0
//
// Numerical building blocks: Gauss-Hermite rules for Gaussian expectations,
// adaptive Gauss-Kronrod on finite intervals, and tail-safe normal functions.
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace enlarge::quad {

/// Nodes and weights with sum_i w_i f(x_i) ~ E[f(Z)], Z ~ N(0, 1).
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Golub-Welsch on the probabilists' Hermite recurrence. Cached per size; thread-safe.
const GaussHermite& gauss_hermite(std::size_t n);

struct Integral {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive 61-point Gauss-Kronrod on [a, b]. Throws QuadratureError (carrying the
/// estimate) if the error bound exceeds max(abs_tol, rel_tol * integral of |f|).
Integral gauss_kronrod(const std::function<double(double)>& f, double a, double b,
                       double abs_tol, double rel_tol, unsigned max_depth = 15);

double normal_pdf(double x);
/// P(Z > x).
double normal_sf(double x);
/// log P(Z > x), accurate far into both tails.
double log_normal_sf(double x);

}  // namespace enlarge::quad
