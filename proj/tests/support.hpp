#pragma once

#include "polaron/fft.hpp"
#include "polaron/grid.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace testing_support {

using namespace polaron;

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Real field built from random Fourier modes with |frequency| <= kmax per axis.
inline ScalarField random_bandlimited(GridPtr g, int kmax, std::uint64_t seed, bool zero_mean = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(g->size()));
  for (std::size_t i = 0; i < g->size(); ++i) {
    const auto j = g->frequency(i);
    bool keep = true;
    for (int a = 0; a < g->dim(); ++a) keep = keep && std::abs(j[a]) <= kmax;
    if (keep) h[static_cast<Eigen::Index>(i)] = {nd(rng), nd(rng)};
  }
  Eigen::VectorXd v = fft::inverse_real(*g, h);
  if (zero_mean) v.array() -= v.mean();
  return ScalarField(g, v);
}

// Normalized isotropic Gaussian of width sigma centred in the cell.
inline ScalarField gaussian_density(GridPtr g, double sigma, const Eigen::VectorXd* center = nullptr) {
  const int d = g->dim();
  const Eigen::VectorXd c = center ? *center : Eigen::VectorXd(0.5 * g->cell().vectors() * Eigen::VectorXd::Ones(d));
  Eigen::VectorXd v(static_cast<Eigen::Index>(g->size()));
  const double norm = std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.5 * d);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const Eigen::VectorXd r = g->minimum_image(g->point(i) - c);
    v[static_cast<Eigen::Index>(i)] = norm * std::exp(-0.5 * r.squaredNorm() / (sigma * sigma));
  }
  return ScalarField(g, v);
}

}  // namespace testing_support
