#include "wbmorph/sparse.hpp"

#include "wbmorph/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace wbmorph {

namespace {

constexpr double kDuplicateAtomCorrelation = 0.99;

}  // namespace

Dictionary::Dictionary(Matrix atoms) : atoms_(std::move(atoms))
{
    if (atoms_.cols() < 1 || atoms_.rows() < 1) {
        throw Error(ErrorCode::InvalidArgument, "dictionary needs at least one atom");
    }
    if (!atoms_.allFinite()) {
        throw Error(ErrorCode::InvalidArgument, "dictionary atoms must be finite");
    }
    for (Eigen::Index j = 0; j < atoms_.cols(); ++j) {
        const double norm = atoms_.col(j).norm();
        if (std::abs(norm - 1.0) > 1e-9) {
            throw Error(ErrorCode::InvalidArgument,
                        "atom " + std::to_string(j) + " has norm " + std::to_string(norm));
        }
    }
    gram_ = atoms_.transpose() * atoms_;
}

double Dictionary::mutual_coherence() const
{
    double mu = 0.0;
    for (Eigen::Index i = 0; i < gram_.rows(); ++i) {
        for (Eigen::Index j = 0; j < gram_.cols(); ++j) {
            if (i != j) {
                mu = std::max(mu, std::abs(gram_(i, j)));
            }
        }
    }
    return mu;
}

Vector SparseCode::reconstruct(const Dictionary& dict) const
{
    Vector out = Vector::Zero(dict.atom_dim());
    for (std::size_t s = 0; s < support.size(); ++s) {
        out += coefficients[s] * dict.atoms().col(support[s]);
    }
    return out;
}

Vector SparseCode::dense(Eigen::Index atom_count) const
{
    Vector out = Vector::Zero(atom_count);
    for (std::size_t s = 0; s < support.size(); ++s) {
        out[support[s]] = coefficients[s];
    }
    return out;
}

namespace {

// Gram-based OMP on a precomputed correlation vector D^T y. The residual
// norm follows from ||r||^2 = ||y||^2 - x_S . (D^T y)_S.
SparseCode omp_gram(const Vector& dty, double y_norm2, const Dictionary& dict, int k, double residual_tol)
{
    const Matrix& gram = dict.gram();
    const Eigen::Index m = dict.atom_count();
    SparseCode code;
    Matrix chol = Matrix::Zero(k, k);  // lower-triangular factor of G_SS
    std::vector<char> used(static_cast<std::size_t>(m), 0);
    Vector corr = dty;
    Vector coeffs;
    const double tiny = 1e-13 * std::max(1.0, std::sqrt(y_norm2));

    for (int step = 0; step < k; ++step) {
        Eigen::Index best = -1;
        double best_val = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            const double v = std::abs(corr[j]);
            if (!used[static_cast<std::size_t>(j)] && v > best_val) {
                best_val = v;
                best = j;
            }
        }
        if (best < 0 || best_val <= tiny) {
            break;
        }

        const auto s = static_cast<Eigen::Index>(code.support.size());
        if (s == 0) {
            chol(0, 0) = 1.0;
        } else {
            Vector g(s);
            for (Eigen::Index a = 0; a < s; ++a) {
                g[a] = gram(code.support[static_cast<std::size_t>(a)], best);
            }
            const Vector w = chol.topLeftCorner(s, s).triangularView<Eigen::Lower>().solve(g);
            const double d2 = gram(best, best) - w.squaredNorm();
            if (d2 <= 1e-12) {
                break;  // atom lies in the span of the current support
            }
            chol.block(s, 0, 1, s) = w.transpose();
            chol(s, s) = std::sqrt(d2);
        }
        code.support.push_back(best);
        used[static_cast<std::size_t>(best)] = 1;

        const auto ns = s + 1;
        Vector rhs(ns);
        for (Eigen::Index a = 0; a < ns; ++a) {
            rhs[a] = dty[code.support[static_cast<std::size_t>(a)]];
        }
        const auto lower = chol.topLeftCorner(ns, ns).triangularView<Eigen::Lower>();
        coeffs = lower.transpose().solve(lower.solve(rhs));

        corr = dty;
        for (Eigen::Index a = 0; a < ns; ++a) {
            corr -= coeffs[a] * gram.col(code.support[static_cast<std::size_t>(a)]);
        }
        const double r2 = std::max(0.0, y_norm2 - coeffs.dot(rhs));
        code.residual_history.push_back(std::sqrt(r2));
        if (std::sqrt(r2) <= residual_tol) {
            break;
        }
    }
    code.coefficients.assign(coeffs.data(), coeffs.data() + coeffs.size());
    return code;
}

void check_sparsity(int k, const Dictionary& dict)
{
    if (k < 1 || k > std::min(dict.atom_dim(), dict.atom_count())) {
        throw Error(ErrorCode::SparsityOutOfRange,
                    "sparsity " + std::to_string(k) + " outside [1, min(n, m)]");
    }
}

}  // namespace

SparseCode omp(const Vector& y, const Dictionary& dict, int k, double residual_tol)
{
    check_sparsity(k, dict);
    if (y.size() != dict.atom_dim()) {
        throw Error(ErrorCode::ShapeMismatch, "signal length does not match the atom dimension");
    }
    const Vector dty = dict.atoms().transpose() * y;
    SparseCode code = omp_gram(dty, y.squaredNorm(), dict, k, residual_tol);
    // The residual of the last step is recomputed explicitly; the Gram identity
    // loses precision for near-exact fits.
    if (!code.residual_history.empty()) {
        code.residual_history.back() =
            std::min(code.residual_history.back(), (y - code.reconstruct(dict)).norm());
    }
    return code;
}

double training_rmse(const Matrix& samples, const Dictionary& dict, int k)
{
    check_sparsity(k, dict);
    const Matrix dty = dict.atoms().transpose() * samples;
    double total = 0.0;
    for (Eigen::Index c = 0; c < samples.cols(); ++c) {
        const SparseCode code = omp_gram(dty.col(c), samples.col(c).squaredNorm(), dict, k, 0.0);
        total += (samples.col(c) - code.reconstruct(dict)).squaredNorm();
    }
    return std::sqrt(total / static_cast<double>(samples.size()));
}

Dictionary learn_dictionary(const Matrix& samples, int m, int k, int epochs, std::uint64_t seed,
                            const DictionaryLearningOptions& options, DictionaryLearningReport* report)
{
    const Eigen::Index n = samples.rows();
    const Eigen::Index count = samples.cols();
    if (m < 1) {
        throw Error(ErrorCode::InvalidArgument, "atom count must be positive");
    }
    if (count < m) {
        throw Error(ErrorCode::TooFewSamples, "need at least as many samples as atoms");
    }
    if (!samples.allFinite()) {
        throw Error(ErrorCode::InvalidArgument, "training samples must be finite");
    }
    if (k < 1 || k > std::min<Eigen::Index>(n, m)) {
        throw Error(ErrorCode::SparsityOutOfRange, "sparsity outside [1, min(n, m)]");
    }

    std::mt19937_64 rng(seed);
    Matrix atoms(n, m);
    {
        Eigen::Index filled = 0;
        for (Eigen::Index c = 0; c < count && filled < m; ++c) {
            const double norm = samples.col(c).norm();
            if (norm > 0.0) {
                atoms.col(filled++) = samples.col(c) / norm;
            }
        }
        std::normal_distribution<double> normal;
        for (; filled < m; ++filled) {
            Vector v = Vector::NullaryExpr(n, [&] { return normal(rng); });
            atoms.col(filled) = v / v.norm();
        }
    }

    DictionaryLearningReport local_report;
    if (options.track_rmse) {
        local_report.rmse_history.push_back(training_rmse(samples, Dictionary(atoms), k));
    }

    Matrix stat_a = Matrix::Zero(m, m);
    Matrix stat_b = Matrix::Zero(n, m);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const Eigen::Index batch = std::max(1, options.batch_size);
    // Past statistics fade out over a window of about four samples per atom.
    const double window = std::clamp(4.0 * m, static_cast<double>(batch), static_cast<double>(count));
    const double forget = 1.0 - static_cast<double>(batch) / window;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<int> usage(static_cast<std::size_t>(m), 0);
        std::vector<std::pair<double, Eigen::Index>> errors;
        errors.reserve(static_cast<std::size_t>(count));

        for (Eigen::Index start = 0; start < count; start += batch) {
            const Eigen::Index stop = std::min(count, start + batch);
            const Dictionary dict(atoms);
            stat_a *= forget;
            stat_b *= forget;
            for (Eigen::Index t = start; t < stop; ++t) {
                const Eigen::Index c = order[static_cast<std::size_t>(t)];
                const Vector x = samples.col(c);
                const Vector dtx = atoms.transpose() * x;
                const SparseCode code = omp_gram(dtx, x.squaredNorm(), dict, k, 0.0);
                const Vector alpha = code.dense(m);
                for (auto j : code.support) {
                    ++usage[static_cast<std::size_t>(j)];
                }
                errors.emplace_back((x - atoms * alpha).squaredNorm(), c);
                stat_a.noalias() += alpha * alpha.transpose();
                stat_b.noalias() += x * alpha.transpose();
            }
            // Block-coordinate update of each atom on the accumulated statistics.
            for (Eigen::Index j = 0; j < m; ++j) {
                const double ajj = stat_a(j, j);
                if (ajj <= 1e-12) {
                    continue;
                }
                Vector u = atoms.col(j) + (stat_b.col(j) - atoms * stat_a.col(j)) / ajj;
                const double norm = u.norm();
                if (norm > 1e-12) {
                    atoms.col(j) = u / norm;
                }
            }
        }

        // Replace atoms that were never selected during the epoch.
        std::sort(errors.begin(), errors.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
        // Atoms that duplicate an earlier atom are treated as unused.
        std::vector<char> stale(static_cast<std::size_t>(m), 0);
        {
            const Matrix gram = atoms.transpose() * atoms;
            for (Eigen::Index j = 0; j < m; ++j) {
                stale[static_cast<std::size_t>(j)] = usage[static_cast<std::size_t>(j)] == 0;
                for (Eigen::Index i = 0; i < j && !stale[static_cast<std::size_t>(j)]; ++i) {
                    stale[static_cast<std::size_t>(j)] =
                        !stale[static_cast<std::size_t>(i)] && std::abs(gram(i, j)) > kDuplicateAtomCorrelation;
                }
            }
        }
        std::size_t next_worst = 0;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (!stale[static_cast<std::size_t>(j)]) {
                continue;
            }
            while (next_worst < errors.size() && samples.col(errors[next_worst].second).norm() == 0.0) {
                ++next_worst;
            }
            if (next_worst >= errors.size()) {
                break;
            }
            const Vector s = samples.col(errors[next_worst++].second);
            atoms.col(j) = s / s.norm();
            stat_a.row(j).setZero();
            stat_a.col(j).setZero();
            stat_b.col(j).setZero();
            ++local_report.replaced_atoms;
        }

        if (options.track_rmse) {
            local_report.rmse_history.push_back(training_rmse(samples, Dictionary(atoms), k));
        }
    }

    if (report != nullptr) {
        *report = std::move(local_report);
    }
    return Dictionary(std::move(atoms));
}

Dictionary learn_dictionary(const std::vector<Vector>& samples, int m, int k, int epochs, std::uint64_t seed)
{
    if (samples.empty()) {
        throw Error(ErrorCode::TooFewSamples, "no training samples");
    }
    Matrix mat(samples.front().size(), static_cast<Eigen::Index>(samples.size()));
    for (std::size_t c = 0; c < samples.size(); ++c) {
        if (samples[c].size() != mat.rows()) {
            throw Error(ErrorCode::ShapeMismatch, "training samples differ in length");
        }
        mat.col(static_cast<Eigen::Index>(c)) = samples[c];
    }
    return learn_dictionary(mat, m, k, epochs, seed);
}

Vector project_sparse(const Vector& y, const Dictionary& dict, int k, int mmse_passes, double noise_sigma,
                      std::uint64_t seed)
{
    if (mmse_passes < 1) {
        throw Error(ErrorCode::InvalidArgument, "at least one projection pass is required");
    }
    if (!(noise_sigma >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "noise level must be non-negative");
    }
    check_sparsity(k, dict);
    if (y.size() != dict.atom_dim()) {
        throw Error(ErrorCode::ShapeMismatch, "signal length does not match the atom dimension");
    }

    Vector acc = Vector::Zero(y.size());
    if (mmse_passes == 1 && noise_sigma == 0.0) {
        acc = omp(y, dict, k).reconstruct(dict);
    } else {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal;
        for (int pass = 0; pass < mmse_passes; ++pass) {
            const Vector noisy = y + noise_sigma * Vector::NullaryExpr(y.size(), [&] { return normal(rng); });
            acc += omp(noisy, dict, k).reconstruct(dict);
        }
        acc /= static_cast<double>(mmse_passes);
    }

    acc = acc.cwiseMax(0.0);
    const double total = acc.sum();
    if (!(total > 0.0)) {
        throw Error(ErrorCode::AllZeroInput, "sparse projection has no positive mass");
    }
    return acc / total;
}

}  // namespace wbmorph
