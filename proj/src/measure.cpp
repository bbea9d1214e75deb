#include "wbmorph/measure.hpp"

#include "wbmorph/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace wbmorph {

GridShape::GridShape(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols)
{
    if (rows == 0 || cols == 0) {
        throw Error(ErrorCode::InvalidArgument, "grid dimensions must be positive");
    }
    if (rows > std::numeric_limits<std::size_t>::max() / cols) {
        throw Error(ErrorCode::InvalidArgument, "grid too large");
    }
}

GridMeasure::GridMeasure(GridShape shape, Vector mass) : shape_(shape), mass_(std::move(mass))
{
    if (static_cast<std::size_t>(mass_.size()) != shape_.size()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "mass vector has " + std::to_string(mass_.size()) + " entries, grid has " +
                        std::to_string(shape_.size()));
    }
    if (!mass_.allFinite() || (mass_.array() < 0.0).any()) {
        throw Error(ErrorCode::InvalidMeasure, "mass entries must be finite and non-negative");
    }
    if (std::abs(mass_.sum() - 1.0) > kMassTolerance) {
        throw Error(ErrorCode::InvalidMeasure,
                    "mass sums to " + std::to_string(mass_.sum()) + ", expected 1");
    }
}

double GridMeasure::mean_row() const
{
    double acc = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
        acc += (*this)[i] * static_cast<double>(shape_.row_of(i));
    }
    return acc;
}

double GridMeasure::mean_col() const
{
    double acc = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
        acc += (*this)[i] * static_cast<double>(shape_.col_of(i));
    }
    return acc;
}

GridMeasure GridMeasure::dirac(GridShape shape, std::size_t index)
{
    if (index >= shape.size()) {
        throw Error(ErrorCode::IndexOutOfRange, "dirac location outside the grid");
    }
    Vector m = Vector::Zero(static_cast<Eigen::Index>(shape.size()));
    m[static_cast<Eigen::Index>(index)] = 1.0;
    return {shape, std::move(m)};
}

GridMeasure GridMeasure::uniform(GridShape shape)
{
    const auto n = static_cast<Eigen::Index>(shape.size());
    return {shape, Vector::Constant(n, 1.0 / static_cast<double>(n))};
}

namespace {

Matrix axis_cost(std::size_t len)
{
    const auto n = static_cast<Eigen::Index>(len);
    Matrix c(n, n);
    const double scale = len > 1 ? 1.0 / static_cast<double>(len - 1) : 0.0;
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) {
            const double d = static_cast<double>(a - b) * scale;
            c(a, b) = d * d;
        }
    }
    return c;
}

}  // namespace

GroundCost::GroundCost(GridShape shape, double epsilon)
    : shape_(shape), epsilon_(epsilon), row_cost_(axis_cost(shape.rows())),
      col_cost_(axis_cost(shape.cols()))
{
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
        throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
    }
}

double GroundCost::operator()(std::size_t i, std::size_t j) const
{
    return cost_between(*this, i, j);
}

double cost_between(const GroundCost& cost, std::size_t i, std::size_t j)
{
    const auto& s = cost.shape();
    if (i >= s.size() || j >= s.size()) {
        throw Error(ErrorCode::IndexOutOfRange, "pixel index outside the grid");
    }
    const auto ri = static_cast<Eigen::Index>(s.row_of(i));
    const auto rj = static_cast<Eigen::Index>(s.row_of(j));
    const auto ci = static_cast<Eigen::Index>(s.col_of(i));
    const auto cj = static_cast<Eigen::Index>(s.col_of(j));
    return cost.row_cost()(ri, rj) + cost.col_cost()(ci, cj);
}

GridMeasure normalize_to_measure(std::span<const double> pixels, GridShape shape)
{
    if (pixels.size() != shape.size()) {
        throw Error(ErrorCode::ShapeMismatch, "pixel count does not match grid shape");
    }
    Vector v(static_cast<Eigen::Index>(pixels.size()));
    bool any_positive = false;
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const double x = pixels[i];
        if (!std::isfinite(x) || x < -1e-9) {
            throw Error(ErrorCode::NegativeInput, "pixel " + std::to_string(i) + " is negative");
        }
        any_positive = any_positive || x > 0.0;
        v[static_cast<Eigen::Index>(i)] = std::max(x, 0.0);
    }
    if (!any_positive) {
        throw Error(ErrorCode::AllZeroInput, "every pixel is zero");
    }
    v = (v / v.sum()).cwiseMax(kMassFloor);
    v /= v.sum();
    return {shape, std::move(v)};
}

GridMeasure normalize_to_measure(const Vector& pixels, GridShape shape)
{
    return normalize_to_measure(std::span<const double>(pixels.data(), pixels.size()), shape);
}

GridMeasure simplex_reproject(const Vector& values, GridShape shape)
{
    if (static_cast<std::size_t>(values.size()) != shape.size()) {
        throw Error(ErrorCode::ShapeMismatch, "projector output has the wrong length");
    }
    if (!values.allFinite()) {
        throw Error(ErrorCode::InvalidMeasure, "non-finite projector output");
    }
    Vector v = values.cwiseMax(0.0);
    const double total = v.sum();
    if (!(total > 0.0)) {
        throw Error(ErrorCode::AllZeroInput, "projection has no positive mass");
    }
    v /= total;
    return {shape, std::move(v)};
}

Vector floored_mass(const GridMeasure& m)
{
    Vector v = m.mass().cwiseMax(kMassFloor);
    return v / v.sum();
}

double total_variation(const Vector& a, const Vector& b)
{
    return 0.5 * (a - b).cwiseAbs().sum();
}

void require_same_shape(const GridShape& a, const GridShape& b, const char* what)
{
    if (!(a == b)) {
        throw Error(ErrorCode::ShapeMismatch, what);
    }
}

}  // namespace wbmorph
