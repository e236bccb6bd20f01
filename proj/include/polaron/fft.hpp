#pragma once

#include "polaron/grid.hpp"

#include <complex>
#include <vector>

namespace polaron::fft {

// Multi-dimensional DFT, row-major. Forward is unnormalized, inverse carries 1/N.
void forward(const std::vector<int>& shape, const std::complex<double>* in, std::complex<double>* out);
void inverse(const std::vector<int>& shape, const std::complex<double>* in, std::complex<double>* out);

Eigen::VectorXcd forward(const Grid& g, const Eigen::VectorXcd& x);
Eigen::VectorXcd forward(const Grid& g, const Eigen::VectorXd& x);
Eigen::VectorXcd inverse(const Grid& g, const Eigen::VectorXcd& x);
Eigen::VectorXd inverse_real(const Grid& g, const Eigen::VectorXcd& x);

FourierField transform(const ScalarField& f);
ScalarField inverse_transform(const FourierField& f);

// Band-limited interpolation of a field onto a finer (or coarser) grid of the same cell.
ScalarField resample(const ScalarField& f, GridPtr target);
ComplexField resample(const ComplexField& f, GridPtr target);

}  // namespace polaron::fft
