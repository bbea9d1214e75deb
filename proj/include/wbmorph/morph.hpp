#pragma once

#include "wbmorph/admm.hpp"
#include "wbmorph/measure.hpp"
#include "wbmorph/projector.hpp"

#include <array>
#include <string>
#include <vector>

namespace wbmorph {

enum class MorphMethod { Unconstrained, Constrained, ExternalInterpolation };

std::string to_string(MorphMethod method);

/// Frames y_0 .. y_{N+1} with y_0 = x1, y_{N+1} = x2 and alpha_i = i / (N + 1).
struct MorphSequence {
    std::vector<GridMeasure> frames;
    std::vector<double> alphas;
    MorphMethod method = MorphMethod::Unconstrained;
    // Per intermediate frame: ADMM outer iterations used / whether it converged.
    std::vector<int> outer_iterations;
    std::vector<char> converged;
};

struct MorphOptions {
    // Start each frame's ADMM from the previous frame's barycenter instead of
    // the unconstrained solution. Forces sequential evaluation.
    bool warm_start = false;
    unsigned jobs = 1;
};

/// Interpolation schedule alpha_i = i / (n_frames + 1), endpoints included.
std::vector<double> morph_schedule(int n_frames);

MorphSequence morph(const GridMeasure& x1, const GridMeasure& x2, int n_frames, const Projector& projector,
                    const GroundCost& cost, const AdmmConfig& config, const MorphOptions& options = {});

/// Bilinear weights ((1-a)(1-b), a(1-b), (1-a)b, ab) for corners ordered
/// (0,0), (1,0), (0,1), (1,1) in (a, b).
std::array<double, 4> bilinear_weights(double a, double b);

/// grid_steps x grid_steps lattice over [0, 1]^2; result[row][col] has
/// b = row / (steps - 1), a = col / (steps - 1). Corners are returned verbatim.
std::vector<std::vector<GridMeasure>> morph4(const std::array<GridMeasure, 4>& corners, int grid_steps,
                                             const Projector& projector, const GroundCost& cost,
                                             const AdmmConfig& config, const MorphOptions& options = {});

struct TransitionReport {
    double regularity = 0.0;        // population std of per-step distances
    double total_distance = 0.0;    // mean of per-step distances
    double manifold_distance = 0.0; // mean ||y - projector(y)||_2 over frames
    std::vector<double> per_step_distances;
    bool all_converged = true;
};

struct EvaluateOptions {
    int sinkhorn_max_iters = kDefaultSinkhornIters;
    double sinkhorn_tol = kDefaultSinkhornTol;
    std::uint64_t seed = 0;
};

/// Transition quality: sqrt of the sharp transport cost between successive
/// frames, their spread and mean, and the mean distance of each frame to
/// its own projection.
TransitionReport evaluate(const std::vector<GridMeasure>& frames, const GroundCost& cost,
                          const Projector& projector, const EvaluateOptions& options = {});

inline TransitionReport evaluate(const MorphSequence& seq, const GroundCost& cost, const Projector& projector,
                                 const EvaluateOptions& options = {})
{
    return evaluate(seq.frames, cost, projector, options);
}

/// Population mean and standard deviation, computed on data shifted by the
/// first value so that identical values give exactly zero spread.
std::pair<double, double> mean_and_std(const std::vector<double>& values);

}  // namespace wbmorph
