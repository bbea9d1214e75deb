#pragma once

#include "wbmorph/gibbs_kernel.hpp"
#include "wbmorph/measure.hpp"

#include <optional>

namespace wbmorph {

/// Dual potentials (f, g) of one entropic transport problem. The implied plan
/// is P_ij = exp((f_i + g_j - C_ij) / epsilon). Gauge: sum(f) == 0.
struct DualPotentials {
    Vector f;
    Vector g;
    double epsilon = 0.0;
    bool converged = false;
    int iterations = 0;
    bool log_domain = false;
    // Marginals the potentials were fitted to (after flooring).
    Vector source_mass;
    Vector target_mass;
};

struct TransportResult {
    /// <P, C>, the transport cost of the entropic plan without the entropy term.
    double cost = 0.0;
    /// <P, C> - epsilon * H(P) with H(P) = -sum P (log P - 1).
    double regularized_cost = 0.0;
    /// L1 error of the plan's first marginal at exit (the second is exact).
    double marginal_error = 0.0;
    DualPotentials potentials;
};

struct SinkhornOptions {
    int max_iters = 10000;
    double tol = 1e-6;
    // Start from these potentials instead of zero.
    const DualPotentials* warm_start = nullptr;
    // Skip the scaling-domain iterations entirely.
    bool force_log_domain = false;
};

inline constexpr double kDefaultEpsilon = 2e-3;
inline constexpr double kDefaultSinkhornTol = 1e-6;
inline constexpr int kDefaultSinkhornIters = 10000;

/// Entropic transport between two grid measures. Scaling-domain iterations
/// switch to log-domain updates once any scaling leaves [1e-30, 1e30] or when
/// epsilon < 1e-3. Non-convergence is reported through
/// `potentials.converged`, never thrown.
TransportResult sinkhorn(const GridMeasure& p, const GridMeasure& q, const GroundCost& cost,
                         int max_iters = kDefaultSinkhornIters, double tol = kDefaultSinkhornTol);

TransportResult sinkhorn(const GridMeasure& p, const GridMeasure& q, const GibbsKernel& kernel,
                         const SinkhornOptions& options);

/// Same as above on raw (strictly positive, unit-sum) mass vectors.
TransportResult sinkhorn_raw(const Vector& p, const Vector& q, const GibbsKernel& kernel,
                             const SinkhornOptions& options);

inline constexpr std::size_t kExactTransportMaxSize = 256;

/// Exact optimal transport cost under the squared ground cost, solved as a
/// min-cost flow with successive shortest paths. Only meant for small grids
/// (n <= 256); throws InstanceTooLarge otherwise.
double exact_lp_transport(const GridMeasure& p, const GridMeasure& q, const GroundCost& cost);

/// Gradient of the regularised cost with respect to the second marginal:
/// g minus its mean under that marginal. Throws NotConverged.
Vector barycentric_displacement(const DualPotentials& potentials, const GroundCost& cost);

}  // namespace wbmorph
