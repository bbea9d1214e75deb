#include "wbmorph/barycenter.hpp"

#include "wbmorph/error.hpp"

#include <cmath>
#include <numeric>

namespace wbmorph {

BarycenterWeights::BarycenterWeights(std::vector<double> weights) : weights_(std::move(weights))
{
    if (weights_.empty()) {
        throw Error(ErrorCode::EmptyInputs, "barycenter needs at least one weight");
    }
    double total = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw Error(ErrorCode::InvalidArgument, "barycenter weights must be non-negative");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw Error(ErrorCode::InvalidArgument, "barycenter weights must sum to 1");
    }
}

BarycenterWeights BarycenterWeights::pair(double alpha)
{
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0, 1]");
    }
    return BarycenterWeights({1.0 - alpha, alpha});
}

namespace {

void check_inputs(const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                  const GridShape& shape)
{
    if (inputs.empty()) {
        throw Error(ErrorCode::EmptyInputs, "barycenter of an empty set");
    }
    if (inputs.size() != weights.size()) {
        throw Error(ErrorCode::ShapeMismatch, "one weight per input is required");
    }
    for (const auto& m : inputs) {
        require_same_shape(m.shape(), shape, "barycenter inputs must share the cost grid");
    }
}

std::vector<std::size_t> active_inputs(const BarycenterWeights& weights)
{
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] > 0.0) {
            idx.push_back(i);
        }
    }
    return idx;
}

bool scalings_ok(const Vector& x)
{
    return x.allFinite() && x.maxCoeff() <= 1e30 && x.minCoeff() >= 1e-300;
}

}  // namespace

Vector geometric_mean_init(const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights)
{
    if (inputs.empty() || inputs.size() != weights.size()) {
        throw Error(ErrorCode::EmptyInputs, "geometric mean needs one weight per input");
    }
    Vector log_mean = Vector::Zero(static_cast<Eigen::Index>(inputs.front().size()));
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (weights[i] > 0.0) {
            log_mean += weights[i] * floored_mass(inputs[i]).array().log().matrix();
        }
    }
    Vector q = (log_mean.array() - log_mean.maxCoeff()).exp().matrix().cwiseMax(kMassFloor);
    return q / q.sum();
}

BarycenterResult solve_entropic_barycenter(const std::vector<GridMeasure>& inputs,
                                           const BarycenterWeights& weights, const GibbsKernel& kernel,
                                           int max_iters, double tol)
{
    const GridShape& shape = kernel.cost().shape();
    check_inputs(inputs, weights, shape);
    const auto active = active_inputs(weights);
    const std::size_t k = active.size();
    const Eigen::Index n = kernel.size();

    std::vector<Vector> p(k);
    std::vector<double> w(k);
    for (std::size_t s = 0; s < k; ++s) {
        p[s] = floored_mass(inputs[active[s]]);
        w[s] = weights[active[s]];
    }

    std::vector<Vector> b(k, Vector::Ones(n));
    std::vector<Vector> ka(k);
    Vector q = Vector::Constant(n, 1.0 / static_cast<double>(n));
    Vector q_prev = q;
    int it = 0;
    bool converged = false;
    bool use_log = kernel.epsilon() < 1e-3;

    if (!use_log) {
        while (it < max_iters) {
            std::vector<Vector> ka_next(k);
            Vector log_q = Vector::Zero(n);
            bool ok = true;
            for (std::size_t s = 0; s < k && ok; ++s) {
                const Vector a = p[s].cwiseQuotient(kernel.apply(b[s]));
                ka_next[s] = kernel.apply(a);
                ok = scalings_ok(a) && scalings_ok(ka_next[s]);
                if (ok) {
                    log_q += w[s] * ka_next[s].array().log().matrix();
                }
            }
            Vector q_next;
            std::vector<Vector> b_next(k);
            if (ok) {
                q_next = log_q.array().exp().matrix();
                for (std::size_t s = 0; s < k && ok; ++s) {
                    b_next[s] = q_next.cwiseQuotient(ka_next[s]);
                    ok = scalings_ok(b_next[s]);
                }
            }
            if (!ok) {
                use_log = true;
                break;
            }
            b = std::move(b_next);
            q_prev = q;
            q = std::move(q_next);
            ++it;
            if ((q - q_prev).lpNorm<1>() < tol) {
                converged = true;
                break;
            }
        }
    }

    if (use_log && !converged) {
        std::vector<Vector> lb(k);
        std::vector<Vector> log_p(k);
        for (std::size_t s = 0; s < k; ++s) {
            lb[s] = b[s].array().log().matrix();
            log_p[s] = p[s].array().log().matrix();
        }
        while (it < max_iters) {
            std::vector<Vector> lka(k);
            Vector log_q = Vector::Zero(n);
            for (std::size_t s = 0; s < k; ++s) {
                const Vector la = log_p[s] - kernel.log_apply(lb[s]);
                lka[s] = kernel.log_apply(la);
                log_q += w[s] * lka[s];
            }
            for (std::size_t s = 0; s < k; ++s) {
                lb[s] = log_q - lka[s];
            }
            q_prev = q;
            q = log_q.array().exp().matrix();
            ++it;
            if ((q - q_prev).lpNorm<1>() < tol) {
                converged = true;
                break;
            }
        }
    }

    q = q.cwiseMax(0.0);
    q /= q.sum();
    return {GridMeasure(shape, std::move(q)), it, converged};
}

GridMeasure entropic_barycenter(const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                                const GroundCost& cost, int max_iters, double tol)
{
    return solve_entropic_barycenter(inputs, weights, GibbsKernel(cost), max_iters, tol).measure;
}

double barycenter_objective(const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                            const GridMeasure& q, const GibbsKernel& kernel, double sinkhorn_tol)
{
    check_inputs(inputs, weights, kernel.cost().shape());
    SinkhornOptions opts;
    opts.tol = sinkhorn_tol;
    double total = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (weights[i] > 0.0) {
            total += weights[i] * sinkhorn(inputs[i], q, kernel, opts).regularized_cost;
        }
    }
    return total;
}

namespace {

struct ProxEvaluation {
    double objective = 0.0;
    Vector gradient;
    std::vector<DualPotentials> potentials;
    bool converged = true;
};

class ProxObjective {
public:
    ProxObjective(const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                  const ProxTerm& prox, const GibbsKernel& kernel, const ProxStepOptions& options)
        : prox_(prox), kernel_(kernel), options_(options)
    {
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            if (weights[i] > 0.0) {
                p_.push_back(floored_mass(inputs[i]));
                w_.push_back(weights[i]);
            }
        }
    }

    ProxEvaluation evaluate(const Vector& q, const std::vector<DualPotentials>* warm) const
    {
        ProxEvaluation ev;
        ev.gradient = Vector::Zero(q.size());
        for (std::size_t s = 0; s < p_.size(); ++s) {
            SinkhornOptions opts;
            opts.tol = options_.sinkhorn_tol;
            opts.max_iters = options_.sinkhorn_max_iters;
            opts.warm_start = warm != nullptr ? &(*warm)[s] : nullptr;
            TransportResult tr = sinkhorn_raw(p_[s], q, kernel_, opts);
            ev.objective += w_[s] * tr.regularized_cost;
            ev.gradient += w_[s] * tr.potentials.g;
            ev.converged = ev.converged && tr.potentials.converged;
            ev.potentials.push_back(std::move(tr.potentials));
        }
        if (prox_.mu > 0.0) {
            const Vector diff = q - prox_.target;
            ev.objective += 0.5 * prox_.mu * diff.squaredNorm();
            ev.gradient += prox_.mu * diff;
        }
        return ev;
    }

private:
    std::vector<Vector> p_;
    std::vector<double> w_;
    const ProxTerm& prox_;
    const GibbsKernel& kernel_;
    const ProxStepOptions& options_;
};

Vector floor_to_simplex(Vector q)
{
    q = q.cwiseMax(kMassFloor);
    return q / q.sum();
}

}  // namespace

ProxStepResult solve_prox_barycenter_step(const std::vector<GridMeasure>& inputs,
                                          const BarycenterWeights& weights, const ProxTerm& prox,
                                          const GibbsKernel& kernel, const ProxStepOptions& options)
{
    const GridShape& shape = kernel.cost().shape();
    check_inputs(inputs, weights, shape);
    if (!(options.step > 0.0)) {
        throw Error(ErrorCode::StepNotPositive, "mirror descent step must be positive");
    }
    if (prox.mu < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "prox weight mu must be non-negative");
    }
    if (prox.mu > 0.0 && static_cast<std::size_t>(prox.target.size()) != shape.size()) {
        throw Error(ErrorCode::ShapeMismatch, "prox target length does not match the grid");
    }

    const ProxObjective objective(inputs, weights, prox, kernel, options);
    Vector q;
    if (options.init) {
        if (static_cast<std::size_t>(options.init->size()) != shape.size()) {
            throw Error(ErrorCode::ShapeMismatch, "initial iterate length does not match the grid");
        }
        q = floor_to_simplex(*options.init);
    } else {
        q = geometric_mean_init(inputs, weights);
    }

    ProxStepResult result{GridMeasure(shape, q), 0, {}, true};
    ProxEvaluation current = objective.evaluate(q, nullptr);
    result.objective_history.push_back(current.objective);
    result.sinkhorn_converged = current.converged;

    double step = options.step;
    for (int it = 0; it < options.inner_iters; ++it) {
        const Vector& grad = current.gradient;
        const double gmin = grad.minCoeff();
        bool found = false;
        bool stalled = false;
        for (int halving = 0; halving < 60 && !found; ++halving) {
            const Vector trial = floor_to_simplex(
                q.cwiseProduct((-step * (grad.array() - gmin)).exp().matrix()));
            ProxEvaluation next = objective.evaluate(trial, &current.potentials);
            if (next.objective <= current.objective) {
                const double decrease = current.objective - next.objective;
                stalled = decrease <= options.rel_decrease_tol * std::abs(current.objective);
                q = trial;
                current = std::move(next);
                result.sinkhorn_converged = result.sinkhorn_converged && current.converged;
                result.objective_history.push_back(current.objective);
                result.iterations = it + 1;
                found = true;
                if (halving == 0) {
                    step *= 2.0;
                }
            } else {
                step *= 0.5;
            }
        }
        if (!found || stalled) {
            break;
        }
    }

    result.measure = GridMeasure(shape, q);
    return result;
}

GridMeasure prox_barycenter_step(const std::vector<GridMeasure>& inputs, const BarycenterWeights& weights,
                                 const ProxTerm& prox, const GroundCost& cost, int inner_iters, double step)
{
    ProxStepOptions opts;
    opts.inner_iters = inner_iters;
    opts.step = step;
    return solve_prox_barycenter_step(inputs, weights, prox, GibbsKernel(cost), opts).measure;
}

}  // namespace wbmorph
