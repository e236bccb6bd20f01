#include "polaron/grid.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace polaron {

LatticeCell::LatticeCell(const Eigen::MatrixXd& vectors) : A_(vectors) {
  const auto d = A_.cols();
  if (d < 1 || d > 3 || A_.rows() != d)
    throw std::invalid_argument("lattice: need d vectors of dimension d, d in {1,2,3}");
  volume_ = std::abs(A_.determinant());
  if (!(volume_ > 1e-14))
    throw std::invalid_argument("lattice: vectors are linearly dependent");
  B_ = 2.0 * std::numbers::pi * A_.inverse().transpose();
}

LatticeCell LatticeCell::cubic(int d, double side) {
  return LatticeCell(side * Eigen::MatrixXd::Identity(d, d));
}

LatticeCell LatticeCell::box(const std::vector<double>& lengths) {
  const int d = static_cast<int>(lengths.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) A(i, i) = lengths[i];
  return LatticeCell(A);
}

std::vector<double> LatticeCell::lengths() const {
  std::vector<double> out(dim());
  for (int a = 0; a < dim(); ++a) out[a] = A_.col(a).norm();
  return out;
}

double LatticeCell::inscribed_radius() const {
  // distance between opposite faces is 2*pi/|b_a|
  double bmax = 0.0;
  for (int a = 0; a < dim(); ++a) bmax = std::max(bmax, B_.col(a).norm());
  return std::numbers::pi / bmax;
}

LatticeCell LatticeCell::supercell(const std::vector<int>& reps) const {
  if (static_cast<int>(reps.size()) != dim())
    throw std::invalid_argument("supercell: repetition count must match dimension");
  Eigen::MatrixXd A = A_;
  for (int a = 0; a < dim(); ++a) {
    if (reps[a] < 1) throw std::invalid_argument("supercell: repetitions must be >= 1");
    A.col(a) *= reps[a];
  }
  return LatticeCell(A);
}

bool LatticeCell::operator==(const LatticeCell& o) const {
  return A_.rows() == o.A_.rows() && (A_ - o.A_).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + A_.cwiseAbs().maxCoeff());
}

Grid::Grid(LatticeCell cell, std::vector<int> n) : cell_(std::move(cell)), n_(std::move(n)) {
  if (static_cast<int>(n_.size()) != cell_.dim())
    throw std::invalid_argument("grid: need one point count per axis");
  size_ = 1;
  for (int v : n_) {
    if (v < 4 || v % 2 != 0)
      throw std::invalid_argument("grid: points per axis must be even and >= 4, got " + std::to_string(v));
    size_ *= static_cast<std::size_t>(v);
  }
  k2_.resize(static_cast<Eigen::Index>(size_));
  const int d = dim();
  std::vector<int> idx(d, 0);
  Eigen::VectorXd j(d);
  for (std::size_t i = 0; i < size_; ++i) {
    for (int a = 0; a < d; ++a) j[a] = idx[a] >= n_[a] / 2 ? idx[a] - n_[a] : idx[a];
    k2_[static_cast<Eigen::Index>(i)] = (cell_.reciprocal() * j).squaredNorm();
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < n_[a]) break;
      idx[a] = 0;
    }
  }
}

std::vector<double> Grid::spacing() const {
  auto len = cell_.lengths();
  for (int a = 0; a < dim(); ++a) len[a] /= n_[a];
  return len;
}

std::vector<int> Grid::multi_index(std::size_t flat) const {
  std::vector<int> idx(dim());
  for (int a = dim() - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(flat % n_[a]);
    flat /= n_[a];
  }
  return idx;
}

std::size_t Grid::flat_index(const std::vector<int>& idx) const {
  std::size_t f = 0;
  for (int a = 0; a < dim(); ++a) {
    int i = idx[a] % n_[a];
    if (i < 0) i += n_[a];
    f = f * n_[a] + static_cast<std::size_t>(i);
  }
  return f;
}

std::vector<int> Grid::frequency(std::size_t flat) const {
  auto idx = multi_index(flat);
  for (int a = 0; a < dim(); ++a)
    if (idx[a] >= n_[a] / 2) idx[a] -= n_[a];
  return idx;
}

Eigen::VectorXd Grid::point(std::size_t flat) const {
  const auto idx = multi_index(flat);
  Eigen::VectorXd frac(dim());
  for (int a = 0; a < dim(); ++a) frac[a] = static_cast<double>(idx[a]) / n_[a];
  return cell_.vectors() * frac;
}

Eigen::VectorXd Grid::kvec(std::size_t flat) const {
  const auto j = frequency(flat);
  Eigen::VectorXd jj(dim());
  for (int a = 0; a < dim(); ++a) jj[a] = j[a];
  return cell_.reciprocal() * jj;
}

Eigen::VectorXd Grid::minimum_image(const Eigen::VectorXd& r) const {
  Eigen::VectorXd frac = cell_.vectors().inverse() * r;
  for (int a = 0; a < dim(); ++a) frac[a] -= std::round(frac[a]);
  Eigen::VectorXd best = cell_.vectors() * frac;
  if (dim() == 1) return best;
  // skewed cells: also test neighbouring images
  double bn = best.squaredNorm();
  const int d = dim();
  const int combos = d == 2 ? 9 : 27;
  for (int c = 0; c < combos; ++c) {
    Eigen::VectorXd shift(d);
    int t = c;
    for (int a = 0; a < d; ++a) {
      shift[a] = (t % 3) - 1;
      t /= 3;
    }
    Eigen::VectorXd cand = cell_.vectors() * (frac + shift);
    if (cand.squaredNorm() < bn - 1e-14) {
      bn = cand.squaredNorm();
      best = cand;
    }
  }
  return best;
}

bool Grid::same_as(const Grid& o) const { return n_ == o.n_ && cell_ == o.cell_; }

ScalarField::ScalarField(GridPtr g, Eigen::VectorXd v, bool is_neutral)
    : grid(std::move(g)), values(std::move(v)), neutral(is_neutral) {
  if (!grid) throw std::invalid_argument("field: null grid");
  if (static_cast<std::size_t>(values.size()) != grid->size())
    throw std::invalid_argument("field: value count does not match grid size");
  if (neutral && values.size() > 0) {
    const double mx = values.cwiseAbs().maxCoeff();
    if (std::abs(values.mean()) > 1e-10 * mx)
      throw std::invalid_argument("field: flagged neutral but mean is not zero");
  }
}

double ScalarField::boundary_max() const {
  const auto& n = grid->shape();
  double m = 0.0;
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const auto idx = grid->multi_index(i);
    bool face = false;
    for (int a = 0; a < grid->dim(); ++a)
      if (idx[a] == 0 || idx[a] == n[a] - 1) face = true;
    if (face) m = std::max(m, std::abs(values[i]));
  }
  return m;
}

}  // namespace polaron
