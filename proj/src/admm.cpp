#include "wbmorph/admm.hpp"

#include "wbmorph/error.hpp"

#include <cmath>

namespace wbmorph {

double AdmmConfig::stop_tol_for(std::size_t n) const
{
    return stop_tol ? *stop_tol : 1e-4 * std::sqrt(static_cast<double>(n));
}

void AdmmConfig::validate() const
{
    if (!(mu > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "mu must be positive");
    }
    if (stop_tol && !(*stop_tol > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "stop_tol must be positive");
    }
    if (max_outer_iters < 0) {
        throw Error(ErrorCode::InvalidArgument, "max_outer_iters must be non-negative");
    }
    if (fixed_iters && *fixed_iters < 1) {
        throw Error(ErrorCode::InvalidArgument, "fixed_iters must be at least 1");
    }
    if (prox_max_iters < 1 || !(prox_tol > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "prox solver limits must be positive");
    }
    if (!(prox_step > 0.0)) {
        throw Error(ErrorCode::StepNotPositive, "prox step must be positive");
    }
}

std::uint64_t projection_seed(std::uint64_t base, int outer_iter)
{
    // splitmix64 of (base, iteration)
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(outer_iter) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

AdmmState initial_admm_state(const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                             const GibbsKernel& kernel, const AdmmConfig& config)
{
    const GridShape& shape = kernel.cost().shape();
    GridMeasure q0 = config.initial_guess
                         ? *config.initial_guess
                         : solve_entropic_barycenter(inputs, weights, kernel, config.barycenter_max_iters,
                                                     config.barycenter_tol)
                               .measure;
    require_same_shape(q0.shape(), shape, "initial guess does not match the cost grid");
    Vector u = Vector::Zero(static_cast<Eigen::Index>(shape.size()));
    return AdmmState{q0, q0, std::move(u), 0, {}, false};
}

namespace {

void check_state(const AdmmState& state, const GridShape& shape)
{
    const bool ok = state.q.shape() == shape && state.r.shape() == shape &&
                    static_cast<std::size_t>(state.u.size()) == shape.size() && state.outer_iter >= 0 &&
                    state.residual_history.size() == static_cast<std::size_t>(state.outer_iter) &&
                    state.u.allFinite();
    bool scalings_ok = true;
    for (const auto& s : state.prox_scalings) {
        scalings_ok = scalings_ok && static_cast<std::size_t>(s.size()) == shape.size() && s.allFinite();
    }
    if (!ok || !scalings_ok) {
        throw Error(ErrorCode::InconsistentState, "ADMM state does not match the problem");
    }
}

GridMeasure prox_step(AdmmState& state, const std::vector<GridMeasure>& inputs,
                      const BarycenterWeights& weights, const GibbsKernel& kernel, const AdmmConfig& config)
{
    const ProxTerm prox{state.r.mass() + state.u, config.mu};
    if (config.prox_solver == ProxSolver::Scaling) {
        const auto* warm = state.prox_scalings.empty() ? nullptr : &state.prox_scalings;
        ProxStepResult res = solve_prox_barycenter_scaling(inputs, weights, prox, kernel, config.prox_max_iters,
                                                           config.prox_tol, warm);
        state.prox_scalings = std::move(res.log_scalings);
        return std::move(res.measure);
    }
    ProxStepOptions opts;
    opts.inner_iters = config.prox_inner_iters;
    opts.step = config.prox_step;
    opts.sinkhorn_tol = config.prox_sinkhorn_tol;
    opts.init = state.q.mass();
    return solve_prox_barycenter_step(inputs, weights, prox, kernel, opts).measure;
}

}  // namespace

AdmmResult resume(AdmmState state, const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                  const Projector& projector, const GibbsKernel& kernel, const AdmmConfig& config)
{
    config.validate();
    const GridShape& shape = kernel.cost().shape();
    check_state(state, shape);
    const double stop_tol = config.stop_tol_for(shape.size());
    const int budget = config.fixed_iters ? *config.fixed_iters : config.max_outer_iters;

    if (!config.fixed_iters && state.converged) {
        return {state.r, std::move(state)};
    }

    for (int it = 0; it < budget; ++it) {
        GridMeasure q = prox_step(state, inputs, weights, kernel, config);
        GridMeasure r = projector.project(q.mass() - state.u, shape, projection_seed(config.seed, state.outer_iter));
        state.u += r.mass() - q.mass();
        const double residual = (q.mass() - r.mass()).norm();
        state.q = std::move(q);
        state.r = std::move(r);
        state.residual_history.push_back(residual);
        ++state.outer_iter;
        state.converged = residual < stop_tol;
        if (!config.fixed_iters && state.converged) {
            break;
        }
    }
    return {state.r, std::move(state)};
}

AdmmResult resume(AdmmState state, const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                  const Projector& projector, const GroundCost& cost, const AdmmConfig& config)
{
    return resume(std::move(state), inputs, weights, projector, GibbsKernel(cost), config);
}

AdmmResult constrained_barycenter(const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                                  const Projector& projector, const GroundCost& cost,
                                  const AdmmConfig& config)
{
    config.validate();
    const GibbsKernel kernel(cost);
    AdmmState state = initial_admm_state(inputs, weights, kernel, config);
    return resume(std::move(state), inputs, weights, projector, kernel, config);
}

}  // namespace wbmorph
