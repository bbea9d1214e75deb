#pragma once

#include "wbmorph/barycenter.hpp"
#include "wbmorph/measure.hpp"
#include "wbmorph/projector.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace wbmorph {

enum class ProxSolver { Scaling, MirrorDescent };

struct AdmmConfig {
    double mu = 0.05;
    // Stop once ||q - r||_2 < stop_tol; defaults to 1e-4 * sqrt(n).
    std::optional<double> stop_tol;
    int max_outer_iters = 20;
    // Run exactly this many iterations, ignoring the stopping rule.
    std::optional<int> fixed_iters;
    std::uint64_t seed = 0;
    // Starting barycenter q0; the unconstrained entropic barycenter when empty.
    std::optional<GridMeasure> initial_guess;

    ProxSolver prox_solver = ProxSolver::Scaling;
    int barycenter_max_iters = kDefaultBarycenterIters;
    double barycenter_tol = kDefaultBarycenterTol;
    // Scaling solver: iteration cap and L1 marginal tolerance.
    int prox_max_iters = kDefaultBarycenterIters;
    double prox_tol = kDefaultBarycenterTol;
    // Mirror descent.
    int prox_inner_iters = 300;
    double prox_step = 1.0;
    double prox_sinkhorn_tol = 1e-10;

    double stop_tol_for(std::size_t n) const;
    void validate() const;
};

struct AdmmState {
    GridMeasure q;
    GridMeasure r;
    Vector u;
    int outer_iter = 0;
    std::vector<double> residual_history;
    bool converged = false;
    // Scalings of the last prox solve, reused to warm-start the next one.
    std::vector<Vector> prox_scalings;
};

struct AdmmResult {
    GridMeasure measure;  // the on-manifold iterate r
    AdmmState state;
};

/// Seed handed to the projector at a given outer iteration.
std::uint64_t projection_seed(std::uint64_t base, int outer_iter);

/// q0 = unconstrained barycenter (or config.initial_guess), r0 = q0, u = 0.
AdmmState initial_admm_state(const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                             const GibbsKernel& kernel, const AdmmConfig& config);

/// Barycenter constrained to the projector's manifold by ADMM:
///   q <- prox barycenter step towards r + u
///   r <- projector(q - u), back on the simplex
///   u <- u + r - q
AdmmResult constrained_barycenter(const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                                  const Projector& projector, const GroundCost& cost,
                                  const AdmmConfig& config);

/// Continues from `state` for up to config.max_outer_iters further iterations
/// (exactly config.fixed_iters when set). Returns at once when the state
/// already met the stopping rule and no fixed count is requested.
AdmmResult resume(AdmmState state, const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                  const Projector& projector, const GroundCost& cost, const AdmmConfig& config);

AdmmResult resume(AdmmState state, const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                  const Projector& projector, const GibbsKernel& kernel, const AdmmConfig& config);

}  // namespace wbmorph
