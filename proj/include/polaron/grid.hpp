#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <vector>

namespace polaron {

// Bravais cell. Lattice vectors are the columns of A; reciprocal vectors the
// columns of B with B^T A = 2*pi*I.
class LatticeCell {
 public:
  explicit LatticeCell(const Eigen::MatrixXd& vectors);

  static LatticeCell cubic(int d, double side);
  static LatticeCell box(const std::vector<double>& lengths);

  int dim() const { return static_cast<int>(A_.cols()); }
  const Eigen::MatrixXd& vectors() const { return A_; }
  const Eigen::MatrixXd& reciprocal() const { return B_; }
  double volume() const { return volume_; }
  std::vector<double> lengths() const;

  // Radius of the largest ball that fits in the cell.
  double inscribed_radius() const;

  LatticeCell supercell(const std::vector<int>& reps) const;
  bool operator==(const LatticeCell& o) const;

 private:
  Eigen::MatrixXd A_, B_;
  double volume_ = 0.0;
};

// Uniform periodic grid on a cell, row-major (last axis fastest).
class Grid {
 public:
  Grid(LatticeCell cell, std::vector<int> n);

  int dim() const { return cell_.dim(); }
  const LatticeCell& cell() const { return cell_; }
  const std::vector<int>& shape() const { return n_; }
  std::size_t size() const { return size_; }
  double volume() const { return cell_.volume(); }
  double dv() const { return cell_.volume() / static_cast<double>(size_); }
  // Spacing along each lattice direction.
  std::vector<double> spacing() const;

  std::vector<int> multi_index(std::size_t flat) const;
  std::size_t flat_index(const std::vector<int>& idx) const;
  // Signed DFT frequency of each axis for a flat index.
  std::vector<int> frequency(std::size_t flat) const;

  Eigen::VectorXd point(std::size_t flat) const;
  Eigen::VectorXd kvec(std::size_t flat) const;
  const Eigen::VectorXd& k2() const { return k2_; }

  // Shortest periodic image of a displacement.
  Eigen::VectorXd minimum_image(const Eigen::VectorXd& r) const;

  bool same_as(const Grid& o) const;

 private:
  LatticeCell cell_;
  std::vector<int> n_;
  std::size_t size_ = 0;
  Eigen::VectorXd k2_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(LatticeCell cell, std::vector<int> n) {
  return std::make_shared<const Grid>(std::move(cell), std::move(n));
}

// Real field on a grid. `neutral` marks densities that must integrate to zero.
struct ScalarField {
  GridPtr grid;
  Eigen::VectorXd values;
  bool neutral = false;

  ScalarField() = default;
  ScalarField(GridPtr g, Eigen::VectorXd v, bool is_neutral = false);
  explicit ScalarField(GridPtr g) : ScalarField(g, Eigen::VectorXd::Zero(g->size())) {}

  double integral() const { return values.sum() * grid->dv(); }
  double max_abs() const { return values.cwiseAbs().maxCoeff(); }
  // Largest |value| on the outer faces of the grid.
  double boundary_max() const;
};

struct ComplexField {
  GridPtr grid;
  Eigen::VectorXcd values;

  double norm2() const { return values.squaredNorm() * grid->dv(); }
};

struct FourierField {
  GridPtr grid;
  Eigen::VectorXcd coeffs;
};

}  // namespace polaron
