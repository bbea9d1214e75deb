// wbmorph: command-line front end.
//
//   wbmorph learn-dict  --idx FILE --atoms M --sparsity K --epochs E --out DICT
//   wbmorph morph       --a IMG --b IMG --frames N --prior P --out-dir DIR
//   wbmorph barycenter4 --images IMG IMG IMG IMG --steps G --prior P --out-dir DIR
//   wbmorph distance    --a IMG --b IMG
//   wbmorph evaluate    --frames DIR --prior P
//
// IMG is a PGM file or IDX-FILE@INDEX. P is none, sparse:DICT or external:CMD.
// Exit status: 0 ok (warnings on stderr), 2 usage, 3 I/O, 4 projector protocol.

#include "wbmorph/admm.hpp"
#include "wbmorph/error.hpp"
#include "wbmorph/io.hpp"
#include "wbmorph/morph.hpp"
#include "wbmorph/projector.hpp"
#include "wbmorph/sparse.hpp"
#include "wbmorph/transport.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace wbmorph;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitProtocol = 4;
constexpr std::size_t kMaxSide = 64;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorCode code)
{
    switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::BadMagic:
    case ErrorCode::TruncatedFile:
        return kExitIo;
    case ErrorCode::ProcessUnavailable:
    case ErrorCode::ProtocolViolation:
    case ErrorCode::Timeout:
        return kExitProtocol;
    default:
        return kExitUsage;
    }
}

struct GlobalOptions {
    std::string config_path;
    std::optional<double> epsilon;
    std::optional<double> mu;
    std::optional<int> fixed_iters;
    std::optional<double> tol;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    bool allow_large = false;
};

RunConfig resolve_config(const GlobalOptions& g)
{
    RunConfig cfg = g.config_path.empty() ? RunConfig{} : RunConfig::load(g.config_path);
    if (g.epsilon) {
        cfg.epsilon = *g.epsilon;
    }
    if (g.mu) {
        cfg.mu = *g.mu;
    }
    if (g.fixed_iters) {
        cfg.fixed_iters = *g.fixed_iters;
    }
    if (g.tol) {
        cfg.stop_tol = *g.tol;
    }
    if (g.seed) {
        cfg.seed = *g.seed;
    }
    cfg.validate();
    return cfg;
}

AdmmConfig admm_config(const RunConfig& cfg)
{
    AdmmConfig a;
    a.mu = cfg.mu;
    a.stop_tol = cfg.stop_tol;
    a.max_outer_iters = cfg.max_outer_iters;
    a.fixed_iters = cfg.fixed_iters;
    a.seed = cfg.seed;
    return a;
}

void check_size(const GridShape& shape, const GlobalOptions& g)
{
    if (!g.allow_large && (shape.rows() > kMaxSide || shape.cols() > kMaxSide)) {
        throw UsageError("images larger than 64x64 need --allow-large");
    }
}

GridMeasure load_image(const std::string& arg, const GlobalOptions& g)
{
    const auto at = arg.rfind('@');
    GridMeasure m = [&] {
        if (at != std::string::npos && at + 1 < arg.size() &&
            std::all_of(arg.begin() + static_cast<long>(at) + 1, arg.end(), ::isdigit)) {
            const auto ds = load_idx(arg.substr(0, at));
            return ds.measure(std::stoul(arg.substr(at + 1)));
        }
        const GrayImage img = read_pgm(arg);
        return normalize_to_measure(std::span<const double>(img.pixels), img.shape);
    }();
    check_size(m.shape(), g);
    return m;
}

std::unique_ptr<Projector> make_projector(const std::string& prior, const RunConfig& cfg)
{
    if (prior == "none") {
        return std::make_unique<IdentityProjector>();
    }
    if (prior.rfind("sparse:", 0) == 0) {
        auto dict = std::make_shared<const Dictionary>(load_dictionary(prior.substr(7)));
        return std::make_unique<SparseProjector>(
            dict, SparseProjectorConfig{cfg.sparsity, cfg.mmse_passes, cfg.noise_sigma});
    }
    if (prior.rfind("external:", 0) == 0 && prior.size() > 9) {
        return std::make_unique<ExternalProjector>(prior.substr(9));
    }
    throw UsageError("--prior must be none, sparse:<dictfile> or external:<command>");
}

void require_dictionary_fits(const Projector& projector, const GridShape& shape)
{
    if (const auto* sparse = dynamic_cast<const SparseProjector*>(&projector)) {
        if (static_cast<std::size_t>(sparse->dictionary().atom_dim()) != shape.size()) {
            throw UsageError("dictionary atoms have " + std::to_string(sparse->dictionary().atom_dim()) +
                             " entries but the images have " + std::to_string(shape.size()) + " pixels");
        }
    }
}

std::string format_report(const TransitionReport& r)
{
    std::ostringstream out;
    out.precision(17);
    out << "regularity=" << r.regularity << '\n';
    out << "total_distance=" << r.total_distance << '\n';
    out << "manifold_distance=" << r.manifold_distance << '\n';
    out << "per_step_distances=";
    for (std::size_t i = 0; i < r.per_step_distances.size(); ++i) {
        out << (i ? "," : "") << r.per_step_distances[i];
    }
    out << '\n';
    out << "all_converged=" << (r.all_converged ? 1 : 0) << '\n';
    return out.str();
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
}

std::string frame_name(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%03zu.pgm", i);
    return buf;
}

std::vector<GridMeasure> read_frames(const fs::path& dir, const GlobalOptions& g)
{
    if (!fs::is_directory(dir)) {
        throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
    }
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("frame_", 0) == 0 && entry.path().extension() == ".pgm") {
            paths.push_back(entry.path());
        }
    }
    std::sort(paths.begin(), paths.end());
    std::vector<GridMeasure> frames;
    for (const auto& p : paths) {
        frames.push_back(load_image(p.string(), g));
    }
    if (frames.size() < 2) {
        throw UsageError(dir.string() + " holds fewer than two frame_*.pgm files");
    }
    return frames;
}

TransitionReport evaluate_frames(const std::vector<GridMeasure>& frames, const Projector& projector,
                                 const RunConfig& cfg)
{
    const GroundCost cost(frames.front().shape(), cfg.epsilon);
    require_dictionary_fits(projector, cost.shape());
    EvaluateOptions opts;
    opts.seed = cfg.seed;
    const auto report = evaluate(frames, cost, projector, opts);
    if (!report.all_converged) {
        std::cerr << "warning: some transport problems did not converge\n";
    }
    return report;
}

int run_learn_dict(const std::string& idx, int atoms, int sparsity, int epochs, const std::string& out,
                   const RunConfig& cfg)
{
    const auto ds = load_idx(idx);
    Matrix samples(static_cast<Eigen::Index>(ds.shape.size()), static_cast<Eigen::Index>(ds.count));
    for (std::size_t i = 0; i < ds.count; ++i) {
        samples.col(static_cast<Eigen::Index>(i)) = ds.measure(i).mass();
    }
    const Dictionary dict = learn_dictionary(samples, atoms, sparsity, epochs, cfg.seed);
    save_dictionary(dict, out);
    return 0;
}

int run_morph(const std::string& a, const std::string& b, int frames, const std::string& prior,
              const fs::path& out_dir, const RunConfig& cfg, const GlobalOptions& g)
{
    const auto x1 = load_image(a, g);
    const auto x2 = load_image(b, g);
    if (!(x1.shape() == x2.shape())) {
        throw UsageError("--a and --b differ in size");
    }
    const auto projector = make_projector(prior, cfg);
    require_dictionary_fits(*projector, x1.shape());
    const GroundCost cost(x1.shape(), cfg.epsilon);
    MorphOptions opts;
    opts.jobs = g.jobs;
    const auto seq = morph(x1, x2, frames, *projector, cost, admm_config(cfg), opts);
    if (std::find(seq.converged.begin(), seq.converged.end(), 0) != seq.converged.end()) {
        std::cerr << "warning: ADMM stopped before meeting the tolerance on some frames\n";
    }

    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        write_pgm(seq.frames[i], out_dir / frame_name(i));
    }
    // Metrics of the frames as written, so `evaluate` on this directory agrees.
    const auto report = evaluate_frames(read_frames(out_dir, g), *projector, cfg);
    write_text(out_dir / "metrics.txt", format_report(report));
    return 0;
}

int run_barycenter4(const std::vector<std::string>& images, int steps, const std::string& prior,
                    const fs::path& out_dir, const RunConfig& cfg, const GlobalOptions& g)
{
    std::array<GridMeasure, 4> corners{load_image(images[0], g), load_image(images[1], g),
                                       load_image(images[2], g), load_image(images[3], g)};
    for (const auto& c : corners) {
        if (!(c.shape() == corners[0].shape())) {
            throw UsageError("--images differ in size");
        }
    }
    const auto projector = make_projector(prior, cfg);
    require_dictionary_fits(*projector, corners[0].shape());
    const GroundCost cost(corners[0].shape(), cfg.epsilon);
    MorphOptions opts;
    opts.jobs = g.jobs;
    const auto lattice = morph4(corners, steps, *projector, cost, admm_config(cfg), opts);
    fs::create_directories(out_dir);
    for (std::size_t r = 0; r < lattice.size(); ++r) {
        for (std::size_t c = 0; c < lattice[r].size(); ++c) {
            char name[48];
            std::snprintf(name, sizeof name, "cell_%02zu_%02zu.pgm", r, c);
            write_pgm(lattice[r][c], out_dir / name);
        }
    }
    return 0;
}

int run_distance(const std::string& a, const std::string& b, const RunConfig& cfg, const GlobalOptions& g)
{
    const auto x1 = load_image(a, g);
    const auto x2 = load_image(b, g);
    if (!(x1.shape() == x2.shape())) {
        throw UsageError("--a and --b differ in size");
    }
    const GroundCost cost(x1.shape(), cfg.epsilon);
    const auto tr = sinkhorn(x1, x2, GibbsKernel(cost), SinkhornOptions{});
    if (!tr.potentials.converged) {
        std::cerr << "warning: Sinkhorn stopped before meeting the tolerance\n";
    }
    std::printf("sharp_cost=%.17g\nregularized_cost=%.17g\nmarginal_error=%.17g\nconverged=%d\n", tr.cost,
                tr.regularized_cost, tr.marginal_error, tr.potentials.converged ? 1 : 0);
    return 0;
}

int run_evaluate(const fs::path& dir, const std::string& prior, const RunConfig& cfg, const GlobalOptions& g)
{
    const auto frames = read_frames(dir, g);
    const auto projector = make_projector(prior, cfg);
    std::cout << format_report(evaluate_frames(frames, *projector, cfg));
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Wasserstein barycenters constrained to a prior, for image morphing"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config_path, "key=value configuration file")->check(CLI::ExistingFile);
    app.add_option("--epsilon", g.epsilon, "entropic regularisation");
    app.add_option("--mu", g.mu, "ADMM penalty");
    app.add_option("--fixed-iters", g.fixed_iters, "run exactly this many ADMM iterations");
    app.add_option("--tol", g.tol, "ADMM stopping tolerance on ||q - r||");
    app.add_option("--seed", g.seed, "random seed");
    app.add_option("--jobs", g.jobs, "worker threads for independent frames")->check(CLI::PositiveNumber);
    app.add_flag("--allow-large", g.allow_large, "accept images larger than 64x64");

    std::string idx, dict_out;
    int atoms = 256, sparsity = 12, epochs = 10;
    auto* learn = app.add_subcommand("learn-dict", "learn a sparse dictionary from an IDX image file");
    learn->add_option("--idx", idx)->required();
    learn->add_option("--atoms", atoms)->check(CLI::PositiveNumber);
    learn->add_option("--sparsity", sparsity)->check(CLI::PositiveNumber);
    learn->add_option("--epochs", epochs)->check(CLI::NonNegativeNumber);
    learn->add_option("--out", dict_out)->required();

    std::string img_a, img_b, prior = "none", out_dir;
    int frames = 9;
    auto* morph_cmd = app.add_subcommand("morph", "morph between two images");
    morph_cmd->add_option("--a", img_a)->required();
    morph_cmd->add_option("--b", img_b)->required();
    morph_cmd->add_option("--frames", frames)->check(CLI::PositiveNumber);
    morph_cmd->add_option("--prior", prior);
    morph_cmd->add_option("--out-dir", out_dir)->required();

    std::vector<std::string> images;
    int steps = 5;
    std::string lattice_dir;
    auto* bary4 = app.add_subcommand("barycenter4", "bilinear lattice of barycenters of four images");
    bary4->add_option("--images", images)->required()->expected(4);
    bary4->add_option("--steps", steps)->check(CLI::Range(2, 1000));
    bary4->add_option("--prior", prior);
    bary4->add_option("--out-dir", lattice_dir)->required();

    std::string dist_a, dist_b;
    auto* dist = app.add_subcommand("distance", "entropic transport cost between two images");
    dist->add_option("--a", dist_a)->required();
    dist->add_option("--b", dist_b)->required();

    std::string frames_dir;
    auto* eval = app.add_subcommand("evaluate", "transition metrics of a directory of frames");
    eval->add_option("--frames", frames_dir)->required();
    eval->add_option("--prior", prior);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        const RunConfig cfg = resolve_config(g);
        if (*learn) {
            RunConfig c = cfg;
            c.atoms = atoms;
            c.sparsity = sparsity;
            return run_learn_dict(idx, atoms, sparsity, epochs, dict_out, c);
        }
        if (*morph_cmd) {
            return run_morph(img_a, img_b, frames, prior, out_dir, cfg, g);
        }
        if (*bary4) {
            return run_barycenter4(images, steps, prior, lattice_dir, cfg, g);
        }
        if (*dist) {
            return run_distance(dist_a, dist_b, cfg, g);
        }
        return run_evaluate(frames_dir, prior, cfg, g);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
