#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>

namespace wbmorph {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Pixel grid with `rows` x `cols` cells, addressed in row-major order.
class GridShape {
public:
    GridShape(std::size_t rows, std::size_t cols);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return rows_ * cols_; }

    std::size_t row_of(std::size_t i) const noexcept { return i / cols_; }
    std::size_t col_of(std::size_t i) const noexcept { return i % cols_; }

    friend bool operator==(const GridShape&, const GridShape&) = default;

private:
    std::size_t rows_;
    std::size_t cols_;
};

/// Probability measure supported on the pixels of a grid.
///
/// Construction validates non-negativity and unit total mass (absolute
/// tolerance kMassTolerance); the object is immutable afterwards.
class GridMeasure {
public:
    static constexpr double kMassTolerance = 1e-9;

    GridMeasure(GridShape shape, Vector mass);

    const GridShape& shape() const noexcept { return shape_; }
    const Vector& mass() const noexcept { return mass_; }
    std::size_t size() const noexcept { return shape_.size(); }
    double operator[](std::size_t i) const { return mass_[static_cast<Eigen::Index>(i)]; }

    /// Mass-weighted mean pixel coordinate along rows and columns.
    double mean_row() const;
    double mean_col() const;

    static GridMeasure dirac(GridShape shape, std::size_t index);
    static GridMeasure uniform(GridShape shape);

private:
    GridShape shape_;
    Vector mass_;
};

/// Squared Euclidean ground cost between pixel centres, each axis rescaled to
/// [0, 1], together with the entropic weight used by the solvers.
class GroundCost {
public:
    GroundCost(GridShape shape, double epsilon);

    const GridShape& shape() const noexcept { return shape_; }
    double epsilon() const noexcept { return epsilon_; }

    double operator()(std::size_t i, std::size_t j) const;

    // Per-axis squared distance tables; the full cost is
    // row_cost(ri, rj) + col_cost(ci, cj).
    const Matrix& row_cost() const noexcept { return row_cost_; }
    const Matrix& col_cost() const noexcept { return col_cost_; }

    GroundCost with_epsilon(double epsilon) const { return {shape_, epsilon}; }

private:
    GridShape shape_;
    double epsilon_;
    Matrix row_cost_;
    Matrix col_cost_;
};

inline constexpr double kMassFloor = 1e-12;

/// Floors entries below kMassFloor and rescales to unit mass.
GridMeasure normalize_to_measure(std::span<const double> pixels, GridShape shape);
GridMeasure normalize_to_measure(const Vector& pixels, GridShape shape);

double cost_between(const GroundCost& cost, std::size_t i, std::size_t j);

/// Clips negative entries to zero and rescales to unit mass. Used to bring
/// projector outputs back onto the simplex.
GridMeasure simplex_reproject(const Vector& values, GridShape shape);

/// Strictly positive copy of `m` (floor kMassFloor, renormalised).
Vector floored_mass(const GridMeasure& m);

/// Total variation distance, half the L1 distance.
double total_variation(const Vector& a, const Vector& b);
inline double total_variation(const GridMeasure& a, const GridMeasure& b)
{
    return total_variation(a.mass(), b.mass());
}

void require_same_shape(const GridShape& a, const GridShape& b, const char* what);

}  // namespace wbmorph
