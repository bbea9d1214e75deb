#pragma once

#include "wbmorph/measure.hpp"
#include "wbmorph/sparse.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

namespace wbmorph {

enum class ProjectorKind { Identity, Sparse, External };

/// Projection onto the prior manifold, followed by re-projection onto the
/// simplex. `seed` drives any randomness in the projection.
class Projector {
public:
    virtual ~Projector() = default;

    virtual ProjectorKind kind() const noexcept = 0;
    virtual std::string describe() const = 0;

    /// Raw manifold projection of y (length n). May leave the simplex.
    virtual Vector project_raw(const Vector& y, std::uint64_t seed) const = 0;

    GridMeasure project(const Vector& y, const GridShape& shape, std::uint64_t seed) const
    {
        return simplex_reproject(project_raw(y, seed), shape);
    }
};

class IdentityProjector final : public Projector {
public:
    ProjectorKind kind() const noexcept override { return ProjectorKind::Identity; }
    std::string describe() const override { return "none"; }
    Vector project_raw(const Vector& y, std::uint64_t) const override { return y; }
};

struct SparseProjectorConfig {
    int sparsity = 12;
    int mmse_passes = 10;
    // Noise standard deviation as a fraction of max(y).
    double noise_rel = 0.05;
};

class SparseProjector final : public Projector {
public:
    SparseProjector(std::shared_ptr<const Dictionary> dict, SparseProjectorConfig config);

    ProjectorKind kind() const noexcept override { return ProjectorKind::Sparse; }
    std::string describe() const override;
    Vector project_raw(const Vector& y, std::uint64_t seed) const override;

    const Dictionary& dictionary() const noexcept { return *dict_; }
    const SparseProjectorConfig& config() const noexcept { return config_; }

private:
    std::shared_ptr<const Dictionary> dict_;
    SparseProjectorConfig config_;
};

/// Projection delegated to a long-lived child process over stdin/stdout.
///
/// Request:  "OTPROJ01", u32 n (LE), n float64 (LE).
/// Response: u32 n (LE, must match), n float64 (LE).
///
/// Calls are serialised; the child is started on first use and restarted
/// after a protocol failure. Closing its stdin asks it to exit.
class ExternalProjector final : public Projector {
public:
    static constexpr std::chrono::milliseconds kDefaultTimeout{30000};

    explicit ExternalProjector(std::string command,
                               std::chrono::milliseconds timeout = kDefaultTimeout);
    ~ExternalProjector() override;

    ExternalProjector(const ExternalProjector&) = delete;
    ExternalProjector& operator=(const ExternalProjector&) = delete;

    ProjectorKind kind() const noexcept override { return ProjectorKind::External; }
    std::string describe() const override { return "external:" + command_; }
    Vector project_raw(const Vector& y, std::uint64_t seed) const override;

    const std::string& command() const noexcept { return command_; }

private:
    struct Child;

    std::string command_;
    std::chrono::milliseconds timeout_;
    mutable std::mutex mutex_;
    mutable std::unique_ptr<Child> child_;
};

/// Free-function form of the external projection: sends y, returns the
/// response clipped at zero and rescaled to unit mass.
Vector project_external(const Vector& y, const ExternalProjector& endpoint);

}  // namespace wbmorph
