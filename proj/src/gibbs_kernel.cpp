#include "wbmorph/gibbs_kernel.hpp"

#include <cmath>
#include <limits>

namespace wbmorph {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vector separable(const Matrix& row_k, const Matrix& col_k, const Vector& x)
{
    const Eigen::Index rows = row_k.rows();
    const Eigen::Index cols = col_k.rows();
    Eigen::Map<const RowMajor> img(x.data(), rows, cols);
    Vector out(x.size());
    Eigen::Map<RowMajor> res(out.data(), rows, cols);
    res.noalias() = row_k * (img * col_k.transpose());
    return out;
}

// out(ri, ci) = log sum_{rj, cj} exp(row_lk(ri, rj) + col_lk(ci, cj) + x(rj, cj))
Vector log_separable(const Matrix& row_lk, const Matrix& col_lk, const Vector& log_x)
{
    const Eigen::Index rows = row_lk.rows();
    const Eigen::Index cols = col_lk.rows();
    Eigen::Map<const RowMajor> img(log_x.data(), rows, cols);

    // Contract the column axis first.
    RowMajor tmp(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index ci = 0; ci < cols; ++ci) {
            double mx = kNegInf;
            for (Eigen::Index cj = 0; cj < cols; ++cj) {
                mx = std::max(mx, col_lk(ci, cj) + img(r, cj));
            }
            if (mx == kNegInf) {
                tmp(r, ci) = kNegInf;
                continue;
            }
            double acc = 0.0;
            for (Eigen::Index cj = 0; cj < cols; ++cj) {
                acc += std::exp(col_lk(ci, cj) + img(r, cj) - mx);
            }
            tmp(r, ci) = mx + std::log(acc);
        }
    }

    Vector out(log_x.size());
    Eigen::Map<RowMajor> res(out.data(), rows, cols);
    for (Eigen::Index ri = 0; ri < rows; ++ri) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            double mx = kNegInf;
            for (Eigen::Index rj = 0; rj < rows; ++rj) {
                mx = std::max(mx, row_lk(ri, rj) + tmp(rj, c));
            }
            if (mx == kNegInf) {
                res(ri, c) = kNegInf;
                continue;
            }
            double acc = 0.0;
            for (Eigen::Index rj = 0; rj < rows; ++rj) {
                acc += std::exp(row_lk(ri, rj) + tmp(rj, c) - mx);
            }
            res(ri, c) = mx + std::log(acc);
        }
    }
    return out;
}

Matrix log_of(const Matrix& m)
{
    return m.unaryExpr([](double v) { return v > 0.0 ? std::log(v) : kNegInf; });
}

}  // namespace

GibbsKernel::GibbsKernel(const GroundCost& cost) : cost_(cost)
{
    const double eps = cost.epsilon();
    row_log_kernel_ = -cost.row_cost() / eps;
    col_log_kernel_ = -cost.col_cost() / eps;
    row_kernel_ = row_log_kernel_.array().exp().matrix();
    col_kernel_ = col_log_kernel_.array().exp().matrix();
    row_kernel_cost_ = row_kernel_.cwiseProduct(cost.row_cost());
    col_kernel_cost_ = col_kernel_.cwiseProduct(cost.col_cost());
    row_log_kernel_cost_ = log_of(cost.row_cost()) + row_log_kernel_;
    col_log_kernel_cost_ = log_of(cost.col_cost()) + col_log_kernel_;
}

Vector GibbsKernel::apply(const Vector& x) const
{
    return separable(row_kernel_, col_kernel_, x);
}

Vector GibbsKernel::apply_cost_weighted(const Vector& x) const
{
    // C = Cr (+) Cc, so K .* C = (Kr .* Cr) (x) Kc + Kr (x) (Kc .* Cc).
    return separable(row_kernel_cost_, col_kernel_, x) + separable(row_kernel_, col_kernel_cost_, x);
}

Vector GibbsKernel::log_apply(const Vector& log_x) const
{
    return log_separable(row_log_kernel_, col_log_kernel_, log_x);
}

Vector GibbsKernel::log_apply_cost_weighted(const Vector& log_x) const
{
    const Vector a = log_separable(row_log_kernel_cost_, col_log_kernel_, log_x);
    const Vector b = log_separable(row_log_kernel_, col_log_kernel_cost_, log_x);
    Vector out(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double mx = std::max(a[i], b[i]);
        out[i] = mx == kNegInf ? kNegInf : mx + std::log(std::exp(a[i] - mx) + std::exp(b[i] - mx));
    }
    return out;
}

}  // namespace wbmorph
