#include "wbmorph/projector.hpp"

#include "wbmorph/error.hpp"

namespace wbmorph {

SparseProjector::SparseProjector(std::shared_ptr<const Dictionary> dict, SparseProjectorConfig config)
    : dict_(std::move(dict)), config_(config)
{
    if (!dict_) {
        throw Error(ErrorCode::InvalidArgument, "sparse projector needs a dictionary");
    }
    if (config_.sparsity < 1 || config_.sparsity > std::min(dict_->atom_dim(), dict_->atom_count())) {
        throw Error(ErrorCode::SparsityOutOfRange, "sparsity outside [1, min(n, m)]");
    }
    if (config_.mmse_passes < 1 || !(config_.noise_rel >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "invalid stochastic-resonance settings");
    }
}

std::string SparseProjector::describe() const
{
    return "sparse(m=" + std::to_string(dict_->atom_count()) + ",k=" + std::to_string(config_.sparsity) +
           ",passes=" + std::to_string(config_.mmse_passes) + ")";
}

Vector SparseProjector::project_raw(const Vector& y, std::uint64_t seed) const
{
    const double sigma = config_.noise_rel * y.cwiseAbs().maxCoeff();
    return project_sparse(y, *dict_, config_.sparsity, config_.mmse_passes, sigma, seed);
}

}  // namespace wbmorph
