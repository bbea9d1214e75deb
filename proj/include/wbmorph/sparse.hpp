#pragma once

#include "wbmorph/measure.hpp"

#include <cstdint>
#include <vector>

namespace wbmorph {

/// Dictionary with unit-norm columns ("atoms"). The Gram matrix is cached at
/// construction so repeated sparse coding does not recompute it.
class Dictionary {
public:
    explicit Dictionary(Matrix atoms);

    const Matrix& atoms() const noexcept { return atoms_; }
    const Matrix& gram() const noexcept { return gram_; }
    Eigen::Index atom_dim() const noexcept { return atoms_.rows(); }
    Eigen::Index atom_count() const noexcept { return atoms_.cols(); }

    /// Largest absolute inner product between two distinct atoms.
    double mutual_coherence() const;

private:
    Matrix atoms_;
    Matrix gram_;
};

struct SparseCode {
    std::vector<Eigen::Index> support;
    std::vector<double> coefficients;
    // Residual L2 norm after each selected atom (size == support.size()).
    std::vector<double> residual_history;

    Vector reconstruct(const Dictionary& dict) const;
    Vector dense(Eigen::Index atom_count) const;
};

/// Orthogonal matching pursuit: greedy max-|correlation| selection followed by
/// a least-squares refit on the support, until `k` atoms are selected or the
/// residual norm drops to `residual_tol`.
SparseCode omp(const Vector& y, const Dictionary& dict, int k, double residual_tol = 0.0);

struct DictionaryLearningOptions {
    int batch_size = 64;
    // Records the training-set RMSE after every epoch (one extra coding pass each).
    bool track_rmse = false;
};

struct DictionaryLearningReport {
    std::vector<double> rmse_history;
    int replaced_atoms = 0;
};

/// Minibatch online dictionary learning. Samples are the columns of
/// `samples`. Initialised with the first `m` non-zero samples (normalised);
/// each minibatch is OMP-coded, sufficient statistics are accumulated, and
/// atoms are refreshed by block-coordinate least squares. Atoms left unused
/// for a whole epoch are replaced by the worst-reconstructed sample.
Dictionary learn_dictionary(const Matrix& samples, int m, int k, int epochs, std::uint64_t seed,
                            const DictionaryLearningOptions& options = {},
                            DictionaryLearningReport* report = nullptr);

Dictionary learn_dictionary(const std::vector<Vector>& samples, int m, int k, int epochs,
                            std::uint64_t seed);

/// Sparse projection with optional stochastic-resonance averaging: mean of
/// `mmse_passes` OMP reconstructions of y + sigma * noise, clipped at zero and
/// rescaled to unit mass. With one pass and sigma = 0 this is the plain OMP
/// reconstruction, rescaled.
Vector project_sparse(const Vector& y, const Dictionary& dict, int k, int mmse_passes, double noise_sigma,
                      std::uint64_t seed);

double training_rmse(const Matrix& samples, const Dictionary& dict, int k);

}  // namespace wbmorph
