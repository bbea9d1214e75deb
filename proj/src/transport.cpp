#include "wbmorph/transport.hpp"

#include "wbmorph/error.hpp"

#include <cmath>

namespace wbmorph {

namespace {

constexpr double kScalingMax = 1e30;
constexpr double kLogScalingMax = 69.07755278982137;  // log(1e30)
constexpr double kLogDomainEpsilon = 1e-3;

bool scaling_ok(const Vector& x)
{
    if (!x.allFinite()) {
        return false;
    }
    return x.maxCoeff() <= kScalingMax && x.minCoeff() >= 1e-300;
}

struct PlanSummary {
    Vector row_marginal;
    Vector col_marginal;
    double cost = 0.0;
};

PlanSummary summarize_standard(const Vector& u, const Vector& v, const GibbsKernel& kernel)
{
    PlanSummary s;
    s.row_marginal = u.cwiseProduct(kernel.apply(v));
    s.col_marginal = v.cwiseProduct(kernel.apply(u));
    s.cost = u.dot(kernel.apply_cost_weighted(v));
    return s;
}

PlanSummary summarize_log(const Vector& lf, const Vector& lg, const GibbsKernel& kernel)
{
    PlanSummary s;
    s.row_marginal = (lf + kernel.log_apply(lg)).array().exp().matrix();
    s.col_marginal = (lg + kernel.log_apply(lf)).array().exp().matrix();
    s.cost = (lf + kernel.log_apply_cost_weighted(lg)).array().exp().sum();
    return s;
}

}  // namespace

TransportResult sinkhorn(const GridMeasure& p, const GridMeasure& q, const GroundCost& cost,
                         int max_iters, double tol)
{
    SinkhornOptions opts;
    opts.max_iters = max_iters;
    opts.tol = tol;
    return sinkhorn(p, q, GibbsKernel(cost), opts);
}

TransportResult sinkhorn(const GridMeasure& p, const GridMeasure& q, const GibbsKernel& kernel,
                         const SinkhornOptions& options)
{
    require_same_shape(p.shape(), kernel.cost().shape(), "first marginal does not match the cost grid");
    require_same_shape(q.shape(), kernel.cost().shape(), "second marginal does not match the cost grid");
    return sinkhorn_raw(floored_mass(p), floored_mass(q), kernel, options);
}

TransportResult sinkhorn_raw(const Vector& p, const Vector& q, const GibbsKernel& kernel,
                             const SinkhornOptions& options)
{
    const Eigen::Index n = kernel.size();
    if (p.size() != n || q.size() != n) {
        throw Error(ErrorCode::ShapeMismatch, "marginal length does not match the cost grid");
    }
    if (!(options.tol > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "sinkhorn tolerance must be positive");
    }
    const double eps = kernel.epsilon();
    const Vector log_p = p.array().log().matrix();
    const Vector log_q = q.array().log().matrix();

    // Scaled potentials: F = f / eps, G = g / eps.
    Vector lf = Vector::Zero(n);
    Vector lg = Vector::Zero(n);
    if (const auto* ws = options.warm_start; ws != nullptr && ws->f.size() == n && ws->g.size() == n) {
        lf = ws->f / eps;
        lg = ws->g / eps;
    }

    bool use_log = options.force_log_domain || eps < kLogDomainEpsilon ||
                   lf.cwiseAbs().maxCoeff() > kLogScalingMax || lg.cwiseAbs().maxCoeff() > kLogScalingMax;
    int it = 0;
    bool converged = false;
    double err = std::numeric_limits<double>::infinity();

    if (!use_log) {
        Vector u = lf.array().exp().matrix();
        Vector v = lg.array().exp().matrix();
        Vector kv = kernel.apply(v);
        while (it < options.max_iters) {
            Vector u_next = p.cwiseQuotient(kv);
            Vector v_next = q.cwiseQuotient(kernel.apply(u_next));
            Vector kv_next = kernel.apply(v_next);
            if (!scaling_ok(u_next) || !scaling_ok(v_next) || !kv_next.allFinite()) {
                use_log = true;
                break;
            }
            u = std::move(u_next);
            v = std::move(v_next);
            kv = std::move(kv_next);
            ++it;
            err = (u.cwiseProduct(kv) - p).lpNorm<1>();
            if (err < options.tol) {
                converged = true;
                break;
            }
        }
        lf = u.array().log().matrix();
        lg = v.array().log().matrix();
    }

    if (use_log) {
        while (it < options.max_iters) {
            lf = log_p - kernel.log_apply(lg);
            lg = log_q - kernel.log_apply(lf);
            ++it;
            const Vector row = (lf + kernel.log_apply(lg)).array().exp().matrix();
            err = (row - p).lpNorm<1>();
            if (err < options.tol) {
                converged = true;
                break;
            }
        }
    }

    const PlanSummary plan = use_log ? summarize_log(lf, lg, kernel)
                                     : summarize_standard(lf.array().exp().matrix(),
                                                          lg.array().exp().matrix(), kernel);

    TransportResult result;
    result.cost = plan.cost;
    result.regularized_cost = eps * (lf.dot(plan.row_marginal) + lg.dot(plan.col_marginal) -
                                     plan.row_marginal.sum());
    result.marginal_error = (plan.row_marginal - p).lpNorm<1>();

    DualPotentials& pot = result.potentials;
    const double shift = lf.mean();
    pot.f = eps * (lf.array() - shift).matrix();
    pot.g = eps * (lg.array() + shift).matrix();
    pot.epsilon = eps;
    pot.converged = converged;
    pot.iterations = it;
    pot.log_domain = use_log;
    pot.source_mass = p;
    pot.target_mass = q;
    return result;
}

Vector barycentric_displacement(const DualPotentials& potentials, const GroundCost& cost)
{
    if (!potentials.converged) {
        throw Error(ErrorCode::NotConverged, "potentials come from an unconverged Sinkhorn run");
    }
    if (static_cast<std::size_t>(potentials.g.size()) != cost.shape().size()) {
        throw Error(ErrorCode::ShapeMismatch, "potential length does not match the cost grid");
    }
    const Vector& w = potentials.target_mass;
    const double mean = w.size() == potentials.g.size() ? potentials.g.dot(w) / w.sum()
                                                        : potentials.g.mean();
    return (potentials.g.array() - mean).matrix();
}

}  // namespace wbmorph
