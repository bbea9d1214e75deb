#pragma once

#include "wbmorph/measure.hpp"

namespace wbmorph {

/// Gibbs kernel K = exp(-C / epsilon) of a grid ground cost, applied through
/// its row/column factorisation: K x = Kr X Kc^T with X the row-major image
/// of x. The n x n kernel is never formed.
class GibbsKernel {
public:
    explicit GibbsKernel(const GroundCost& cost);

    const GroundCost& cost() const noexcept { return cost_; }
    double epsilon() const noexcept { return cost_.epsilon(); }
    Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(cost_.shape().size()); }

    // K is symmetric, so the same product serves K and K^T.
    Vector apply(const Vector& x) const;

    // (K .* C) x, used for the transport cost <P, C> of a scaled plan.
    Vector apply_cost_weighted(const Vector& x) const;

    // log(K exp(x)) evaluated with separable log-sum-exp.
    Vector log_apply(const Vector& log_x) const;

    // log((K .* C) exp(x)).
    Vector log_apply_cost_weighted(const Vector& log_x) const;

private:
    GroundCost cost_;
    Matrix row_kernel_;
    Matrix col_kernel_;
    Matrix row_kernel_cost_;
    Matrix col_kernel_cost_;
    Matrix row_log_kernel_;
    Matrix col_log_kernel_;
    Matrix row_log_kernel_cost_;
    Matrix col_log_kernel_cost_;
};

}  // namespace wbmorph
