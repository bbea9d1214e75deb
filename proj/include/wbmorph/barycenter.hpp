#pragma once

#include "wbmorph/gibbs_kernel.hpp"
#include "wbmorph/measure.hpp"
#include "wbmorph/transport.hpp"

#include <optional>
#include <vector>

namespace wbmorph {

/// Convex weights of a barycenter problem (non-negative, unit sum).
class BarycenterWeights {
public:
    explicit BarycenterWeights(std::vector<double> weights);

    /// (1 - alpha, alpha): alpha is the progress from the first input to the second.
    static BarycenterWeights pair(double alpha);

    const std::vector<double>& values() const noexcept { return weights_; }
    std::size_t size() const noexcept { return weights_.size(); }
    double operator[](std::size_t i) const { return weights_[i]; }

private:
    std::vector<double> weights_;
};

/// Quadratic coupling (mu / 2) ||target - q||^2 added to the barycenter objective.
struct ProxTerm {
    Vector target;
    double mu = 0.0;
};

struct BarycenterResult {
    GridMeasure measure;
    int iterations = 0;
    bool converged = false;
};

inline constexpr int kDefaultBarycenterIters = 10000;
inline constexpr double kDefaultBarycenterTol = 1e-6;

/// Weighted entropic barycenter by iterative Bregman projections; stops when
/// successive iterates differ by less than `tol` in L1.
BarycenterResult solve_entropic_barycenter(const std::vector<GridMeasure>& inputs,
                                           const BarycenterWeights& weights, const GibbsKernel& kernel,
                                           int max_iters = kDefaultBarycenterIters,
                                           double tol = kDefaultBarycenterTol);

GridMeasure entropic_barycenter(const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                                const GroundCost& cost, int max_iters = kDefaultBarycenterIters,
                                double tol = kDefaultBarycenterTol);

/// sum_i w_i OT_eps(p_i, q) with OT_eps the regularised transport cost.
double barycenter_objective(const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                            const GridMeasure& q, const GibbsKernel& kernel,
                            double sinkhorn_tol = 1e-10);

struct ProxStepOptions {
    int inner_iters = 300;
    double step = 1.0;
    // Inner iterations stop once the relative objective decrease falls below this.
    double rel_decrease_tol = 1e-7;
    double sinkhorn_tol = 1e-10;
    int sinkhorn_max_iters = kDefaultSinkhornIters;
    // Starting iterate; the weighted geometric mean of the inputs when empty.
    std::optional<Vector> init;
};

struct ProxStepResult {
    GridMeasure measure;
    int iterations = 0;
    // Objective after every accepted iterate, starting with the initial point.
    std::vector<double> objective_history;
    bool sinkhorn_converged = true;
    // Log scalings of the second marginals of the plans (scaling solver
    // only); feed back in to warm-start a nearby problem.
    std::vector<Vector> log_scalings;
};

/// Approximate minimiser over the simplex of
///   sum_i w_i OT_eps(p_i, q) + (mu / 2) ||target - q||^2
/// by entropic mirror descent with backtracking on the step size.
ProxStepResult solve_prox_barycenter_step(const std::vector<GridMeasure>& inputs,
                                          const BarycenterWeights& weights, const ProxTerm& prox,
                                          const GibbsKernel& kernel, const ProxStepOptions& options);

GridMeasure prox_barycenter_step(const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                                 const ProxTerm& prox, const GroundCost& cost, int inner_iters = 300,
                                 double step = 1.0);

/// Same objective as solve_prox_barycenter_step, minimised by alternating
/// scaling updates on the transport plans. The quadratic term enters through
/// a per-pixel update log q + (mu / eps) (q - target) = sum_i w_i log(K^T a_i),
/// so every iteration costs the same as one barycenter iteration.
/// `objective_history` is left empty; `sinkhorn_converged` reports whether
/// successive iterates met `tol` in L1.
ProxStepResult solve_prox_barycenter_scaling(const std::vector<GridMeasure>& inputs,
                                             const BarycenterWeights& weights, const ProxTerm& prox,
                                             const GibbsKernel& kernel,
                                             int max_iters = kDefaultBarycenterIters,
                                             double tol = kDefaultBarycenterTol,
                                             const std::vector<Vector>* warm_start = nullptr);

/// Solution w of w + exp(w) = d.
double wright_omega(double d);

/// Weighted geometric mean of the (floored) inputs, renormalised.
Vector geometric_mean_init(const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights);

}  // namespace wbmorph
