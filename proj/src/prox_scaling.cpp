#include "wbmorph/barycenter.hpp"
#include "wbmorph/error.hpp"

#include <cmath>
#include <limits>

namespace wbmorph {

namespace {

double omega_newton(double d, double w)
{
    for (int it = 0; it < 100; ++it) {
        const double e = std::exp(w);
        const double step = (w + e - d) / (1.0 + e);
        w -= step;
        if (std::abs(step) <= 4e-16 * std::max(1.0, std::abs(w))) {
            break;
        }
    }
    return w;
}

}  // namespace

double wright_omega(double d)
{
    if (!std::isfinite(d)) {
        return d;
    }
    // Start right of the root, where Newton on the convex w + e^w - d is monotone.
    return omega_newton(d, d > 1.0 ? std::log(d) : d);
}

namespace {

// Solves log q + lambda (q - t) + nu = log_mean entrywise, with the scalar nu
// chosen so that q sums to one. `nu` carries the previous multiplier in and
// the new one out.
class ProxUpdate {
public:
    ProxUpdate(const ProxTerm& prox, double lambda) : prox_(prox), lambda_(lambda)
    {
        if (lambda_ > 0.0) {
            log_lambda_ = std::log(lambda_);
        }
    }

    Vector log_q(const Vector& log_mean)
    {
        if (lambda_ <= 0.0) {
            const double mx = log_mean.maxCoeff();
            const double lse = mx + std::log((log_mean.array() - mx).exp().sum());
            return (log_mean.array() - lse).matrix();
        }
        const Eigen::Index n = log_mean.size();
        d_.resize(n);
        if (w_.size() != n) {
            w_ = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            d_[i] = log_mean[i] + lambda_ * prox_.target[i] + log_lambda_;
        }

        double slope = 0.0;
        double f = excess(nu_, slope);
        if (std::abs(f) > 1e-14) {
            double lo = nu_;
            double hi = nu_;
            if (f > 0.0) {
                double fh = f;
                for (double span = 1e-3; fh > 0.0; span *= 4.0) {
                    lo = hi;
                    hi = nu_ + span;
                    fh = excess(hi, slope);
                }
            } else {
                double fl = f;
                for (double span = 1e-3; fl < 0.0; span *= 4.0) {
                    hi = lo;
                    lo = nu_ - span;
                    fl = excess(lo, slope);
                }
            }
            // Safeguarded Newton on the decreasing function sum q(nu) - 1.
            double nu = nu_;
            f = excess(nu, slope);
            for (int it = 0; it < 200 && std::abs(f) > 1e-14; ++it) {
                if (f > 0.0) {
                    lo = std::max(lo, nu);
                } else {
                    hi = std::min(hi, nu);
                }
                double next = nu - f / slope;
                if (!(next > lo && next < hi)) {
                    next = 0.5 * (lo + hi);
                }
                if (next == nu) {
                    break;
                }
                nu = next;
                f = excess(nu, slope);
            }
            nu_ = nu;
        }
        return (w_.array() - log_lambda_).matrix();
    }

private:
    double excess(double nu, double& slope)
    {
        double total = 0.0;
        slope = 0.0;
        for (Eigen::Index i = 0; i < d_.size(); ++i) {
            const double di = d_[i] - nu;
            // Warm start from the previous solution when it lies right of the root.
            const double prev = w_[i];
            w_[i] = std::isfinite(prev) && prev + std::exp(prev) >= di ? omega_newton(di, prev)
                                                                       : wright_omega(di);
            const double x = std::exp(w_[i] - log_lambda_);
            total += x;
            slope -= x / (1.0 + lambda_ * x);
        }
        return total - 1.0;
    }

    const ProxTerm& prox_;
    double lambda_;
    double log_lambda_ = 0.0;
    double nu_ = 0.0;
    Vector d_;
    Vector w_;
};

bool positive_finite(const Vector& x)
{
    return x.allFinite() && x.maxCoeff() <= 1e30 && x.minCoeff() >= 1e-300;
}

}  // namespace

ProxStepResult solve_prox_barycenter_scaling(const std::vector<GridMeasure>& inputs,
                                             const BarycenterWeights& weights, const ProxTerm& prox,
                                             const GibbsKernel& kernel, int max_iters, double tol,
                                             const std::vector<Vector>* warm_start)
{
    const GridShape& shape = kernel.cost().shape();
    if (inputs.empty()) {
        throw Error(ErrorCode::EmptyInputs, "barycenter of an empty set");
    }
    if (inputs.size() != weights.size()) {
        throw Error(ErrorCode::ShapeMismatch, "one weight per input is required");
    }
    for (const auto& m : inputs) {
        require_same_shape(m.shape(), shape, "barycenter inputs must share the cost grid");
    }
    if (prox.mu < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "prox weight mu must be non-negative");
    }
    if (prox.mu > 0.0 && static_cast<std::size_t>(prox.target.size()) != shape.size()) {
        throw Error(ErrorCode::ShapeMismatch, "prox target length does not match the grid");
    }

    std::vector<Vector> p;
    std::vector<double> w;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (weights[i] > 0.0) {
            p.push_back(floored_mass(inputs[i]));
            w.push_back(weights[i]);
        }
    }
    const std::size_t k = p.size();
    const Eigen::Index n = kernel.size();
    ProxUpdate update(prox, prox.mu / kernel.epsilon());

    // Iterates stop once the first marginals of all plans are met within tol
    // (the second marginals equal q by construction).
    std::vector<Vector> lb(k, Vector::Zero(n));
    if (warm_start != nullptr && warm_start->size() == k) {
        for (std::size_t s = 0; s < k; ++s) {
            if ((*warm_start)[s].size() == n && (*warm_start)[s].allFinite()) {
                lb[s] = (*warm_start)[s];
            }
        }
    }
    Vector log_q = Vector::Constant(n, -std::log(static_cast<double>(n)));
    int it = 0;
    bool converged = false;
    bool use_log = kernel.epsilon() < 1e-3;

    if (!use_log) {
        std::vector<Vector> b(k);
        std::vector<Vector> kb(k);
        for (std::size_t s = 0; s < k && !use_log; ++s) {
            b[s] = lb[s].array().exp().matrix();
            kb[s] = kernel.apply(b[s]);
            use_log = !positive_finite(b[s]) || !positive_finite(kb[s]);
        }
        while (it < max_iters && !use_log) {
            std::vector<Vector> a(k);
            std::vector<Vector> ka(k);
            Vector log_mean = Vector::Zero(n);
            bool ok = true;
            for (std::size_t s = 0; s < k && ok; ++s) {
                a[s] = p[s].cwiseQuotient(kb[s]);
                ka[s] = kernel.apply(a[s]);
                ok = positive_finite(a[s]) && positive_finite(ka[s]);
                if (ok) {
                    log_mean += w[s] * ka[s].array().log().matrix();
                }
            }
            Vector log_q_next;
            std::vector<Vector> b_next(k);
            std::vector<Vector> kb_next(k);
            double err = 0.0;
            if (ok) {
                log_q_next = update.log_q(log_mean);
                const Vector q_next = log_q_next.array().exp().matrix();
                for (std::size_t s = 0; s < k && ok; ++s) {
                    b_next[s] = q_next.cwiseQuotient(ka[s]);
                    kb_next[s] = kernel.apply(b_next[s]);
                    ok = positive_finite(b_next[s]) && kb_next[s].allFinite();
                    err += w[s] * (a[s].cwiseProduct(kb_next[s]) - p[s]).lpNorm<1>();
                }
            }
            if (!ok) {
                use_log = true;
                break;
            }
            b = std::move(b_next);
            kb = std::move(kb_next);
            log_q = std::move(log_q_next);
            ++it;
            if (err < tol) {
                converged = true;
                break;
            }
        }
        if (it > 0) {
            for (std::size_t s = 0; s < k; ++s) {
                lb[s] = b[s].array().log().matrix();
            }
        }
    }

    if (use_log && !converged) {
        std::vector<Vector> log_p(k);
        for (std::size_t s = 0; s < k; ++s) {
            log_p[s] = p[s].array().log().matrix();
        }
        while (it < max_iters) {
            std::vector<Vector> la(k);
            std::vector<Vector> lka(k);
            Vector log_mean = Vector::Zero(n);
            for (std::size_t s = 0; s < k; ++s) {
                la[s] = log_p[s] - kernel.log_apply(lb[s]);
                lka[s] = kernel.log_apply(la[s]);
                log_mean += w[s] * lka[s];
            }
            log_q = update.log_q(log_mean);
            double err = 0.0;
            for (std::size_t s = 0; s < k; ++s) {
                lb[s] = log_q - lka[s];
                const Vector row = (la[s] + kernel.log_apply(lb[s])).array().exp().matrix();
                err += w[s] * (row - p[s]).lpNorm<1>();
            }
            ++it;
            if (err < tol) {
                converged = true;
                break;
            }
        }
    }

    Vector q = log_q.array().exp().matrix().cwiseMax(kMassFloor);
    q /= q.sum();
    ProxStepResult result{GridMeasure(shape, std::move(q)), it, {}, converged, std::move(lb)};
    return result;
}

}  // namespace wbmorph
