#include "wbmorph/morph.hpp"

#include "wbmorph/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <thread>

namespace wbmorph {

std::string to_string(MorphMethod method)
{
    switch (method) {
    case MorphMethod::Unconstrained: return "unconstrained";
    case MorphMethod::Constrained: return "constrained";
    case MorphMethod::ExternalInterpolation: return "external-interpolation";
    }
    return "unknown";
}

namespace {

// Runs task(0..count-1) on up to `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& task)
{
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            task(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

}  // namespace

std::vector<double> morph_schedule(int n_frames)
{
    if (n_frames < 1) {
        throw Error(ErrorCode::InvalidArgument, "a morph needs at least one intermediate frame");
    }
    std::vector<double> alphas;
    for (int i = 0; i <= n_frames + 1; ++i) {
        alphas.push_back(static_cast<double>(i) / static_cast<double>(n_frames + 1));
    }
    return alphas;
}

MorphSequence morph(const GridMeasure& x1, const GridMeasure& x2, int n_frames, const Projector& projector,
                    const GroundCost& cost, const AdmmConfig& config, const MorphOptions& options)
{
    require_same_shape(x1.shape(), cost.shape(), "first endpoint does not match the cost grid");
    require_same_shape(x2.shape(), cost.shape(), "second endpoint does not match the cost grid");
    config.validate();

    MorphSequence seq;
    seq.alphas = morph_schedule(n_frames);
    seq.method = projector.kind() == ProjectorKind::Identity ? MorphMethod::Unconstrained
                                                             : MorphMethod::Constrained;
    const std::vector<GridMeasure> inputs{x1, x2};
    const GibbsKernel kernel(cost);

    std::vector<std::optional<AdmmResult>> results(static_cast<std::size_t>(n_frames));
    auto run_frame = [&](std::size_t i, const AdmmConfig& frame_config) {
        const auto weights = BarycenterWeights::pair(seq.alphas[i + 1]);
        AdmmState state = initial_admm_state(inputs, weights, kernel, frame_config);
        results[i] = resume(std::move(state), inputs, weights, projector, kernel, frame_config);
    };

    if (options.warm_start) {
        for (std::size_t i = 0; i < results.size(); ++i) {
            AdmmConfig frame_config = config;
            if (i > 0) {
                frame_config.initial_guess = results[i - 1]->state.q;
            }
            run_frame(i, frame_config);
        }
    } else {
        parallel_for(results.size(), options.jobs, [&](std::size_t i) { run_frame(i, config); });
    }

    seq.frames.push_back(x1);
    for (auto& res : results) {
        seq.frames.push_back(res->measure);
        seq.outer_iterations.push_back(res->state.outer_iter);
        seq.converged.push_back(res->state.converged ? 1 : 0);
    }
    seq.frames.push_back(x2);
    return seq;
}

std::array<double, 4> bilinear_weights(double a, double b)
{
    return {(1.0 - a) * (1.0 - b), a * (1.0 - b), (1.0 - a) * b, a * b};
}

std::vector<std::vector<GridMeasure>> morph4(const std::array<GridMeasure, 4>& corners, int grid_steps,
                                             const Projector& projector, const GroundCost& cost,
                                             const AdmmConfig& config, const MorphOptions& options)
{
    if (grid_steps < 2) {
        throw Error(ErrorCode::InvalidArgument, "grid_steps must be at least 2");
    }
    for (const auto& c : corners) {
        require_same_shape(c.shape(), cost.shape(), "corner does not match the cost grid");
    }
    config.validate();
    const GibbsKernel kernel(cost);
    const std::vector<GridMeasure> inputs(corners.begin(), corners.end());
    const auto steps = static_cast<std::size_t>(grid_steps);
    const double denom = static_cast<double>(grid_steps - 1);

    std::vector<std::optional<GridMeasure>> cells(steps * steps);
    parallel_for(cells.size(), options.jobs, [&](std::size_t idx) {
        const std::size_t row = idx / steps;
        const std::size_t col = idx % steps;
        const bool corner_row = row == 0 || row == steps - 1;
        const bool corner_col = col == 0 || col == steps - 1;
        if (corner_row && corner_col) {
            cells[idx] = corners[(row == 0 ? 0 : 2) + (col == 0 ? 0 : 1)];
            return;
        }
        const double a = static_cast<double>(col) / denom;
        const double b = static_cast<double>(row) / denom;
        const auto w = bilinear_weights(a, b);
        std::vector<double> wv(w.begin(), w.end());
        double total = 0.0;
        for (double x : wv) {
            total += x;
        }
        for (double& x : wv) {
            x /= total;
        }
        const BarycenterWeights weights(std::move(wv));
        AdmmState state = initial_admm_state(inputs, weights, kernel, config);
        cells[idx] = resume(std::move(state), inputs, weights, projector, kernel, config).measure;
    });

    std::vector<std::vector<GridMeasure>> lattice(steps);
    for (std::size_t row = 0; row < steps; ++row) {
        for (std::size_t col = 0; col < steps; ++col) {
            lattice[row].push_back(*cells[row * steps + col]);
        }
    }
    return lattice;
}

std::pair<double, double> mean_and_std(const std::vector<double>& values)
{
    if (values.empty()) {
        return {0.0, 0.0};
    }
    const double shift = values.front();
    double s1 = 0.0;
    double s2 = 0.0;
    for (double v : values) {
        const double d = v - shift;
        s1 += d;
        s2 += d * d;
    }
    const double count = static_cast<double>(values.size());
    const double mean_shifted = s1 / count;
    const double var = std::max(0.0, s2 / count - mean_shifted * mean_shifted);
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    return {mean / count, std::sqrt(var)};
}

TransitionReport evaluate(const std::vector<GridMeasure>& frames, const GroundCost& cost,
                          const Projector& projector, const EvaluateOptions& options)
{
    if (frames.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "evaluation needs at least two frames");
    }
    for (const auto& f : frames) {
        require_same_shape(f.shape(), cost.shape(), "frame does not match the cost grid");
    }
    const GibbsKernel kernel(cost);
    SinkhornOptions opts;
    opts.max_iters = options.sinkhorn_max_iters;
    opts.tol = options.sinkhorn_tol;

    TransitionReport report;
    for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
        // Fixed pair order, so a reversed sequence solves the same problems.
        const GridMeasure* a = &frames[i];
        const GridMeasure* b = &frames[i + 1];
        if (std::lexicographical_compare(b->mass().begin(), b->mass().end(), a->mass().begin(), a->mass().end())) {
            std::swap(a, b);
        }
        const TransportResult tr = sinkhorn(*a, *b, kernel, opts);
        report.all_converged = report.all_converged && tr.potentials.converged;
        report.per_step_distances.push_back(std::sqrt(std::max(0.0, tr.cost)));
    }
    const auto [mean, stdev] = mean_and_std(report.per_step_distances);
    report.total_distance = mean;
    report.regularity = stdev;

    double manifold = 0.0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const Vector& y = frames[i].mass();
        const GridMeasure proj = projector.project(y, cost.shape(), projection_seed(options.seed, static_cast<int>(i)));
        manifold += (y - proj.mass()).norm();
    }
    report.manifold_distance = manifold / static_cast<double>(frames.size());
    return report;
}

}  // namespace wbmorph
