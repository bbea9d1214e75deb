// Runs the acceptance checks and prints one PASS/FAIL line per criterion.
// Exit status is the number of failed criteria.

#include "test_support.hpp"
#include "wbmorph/admm.hpp"
#include "wbmorph/error.hpp"
#include "wbmorph/io.hpp"
#include "wbmorph/morph.hpp"
#include "wbmorph/projector.hpp"
#include "wbmorph/sparse.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <unistd.h>

using namespace wbmorph;
using namespace wbmorph::testing;

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Matrix mnist_training_matrix()
{
    const auto train = load_idx(data_dir() / "mnist-train-images-idx3-ubyte");
    Matrix samples(static_cast<Eigen::Index>(train.shape.size()), static_cast<Eigen::Index>(train.count));
    for (std::size_t i = 0; i < train.count; ++i) {
        samples.col(static_cast<Eigen::Index>(i)) = train.measure(i).mass();
    }
    return samples;
}

Outcome sinkhorn_vs_lp()
{
    std::mt19937_64 rng(101);
    const GridShape shape(4, 4);
    const GroundCost cost(shape, 1e-3);
    const GibbsKernel kernel(cost);
    double worst_err = 0.0;
    double worst_time = 0.0;
    for (int t = 0; t < 100; ++t) {
        const auto p = random_measure(shape, rng);
        const auto q = random_measure(shape, rng);
        const auto t0 = Clock::now();
        const auto tr = sinkhorn(p, q, kernel, SinkhornOptions{});
        worst_time = std::max(worst_time, seconds_since(t0));
        const double lp = exact_lp_transport(p, q, cost);
        worst_err = std::max(worst_err, std::abs(tr.cost - lp) / lp);
    }
    return {worst_err <= 0.05 && worst_time < 1.0,
            fmt("worst relative error %.4f, slowest instance %.3f s", worst_err, worst_time)};
}

Outcome dirac_interpolation()
{
    const auto t0 = Clock::now();
    const GridShape shape(1, 17);
    const GroundCost cost(shape, 2e-3);
    const std::vector<GridMeasure> inputs{GridMeasure::dirac(shape, 2), GridMeasure::dirac(shape, 14)};
    const IdentityProjector id;
    bool ok = true;
    std::string positions;
    for (double alpha : {0.25, 0.5, 0.75}) {
        const auto res = constrained_barycenter(inputs, BarycenterWeights::pair(alpha), id, cost, AdmmConfig{});
        const double pos = mean_position(res.measure);
        const double expected = 2.0 + 12.0 * alpha;
        const auto oracle = static_cast<double>(best_dirac(shape, inputs, {1.0 - alpha, alpha}));
        ok = ok && std::abs(pos - expected) <= 0.5 && std::abs(pos - oracle) <= 0.5;
        positions += fmt(" %.3f", pos);
    }
    const double elapsed = seconds_since(t0);
    return {ok && elapsed < 5.0, "mean positions" + positions + fmt(" in %.2f s", elapsed)};
}

Outcome unconstrained_reduction()
{
    std::mt19937_64 rng(103);
    const GridShape shape(16, 16);
    const GroundCost cost(shape, 2e-3);
    const IdentityProjector id;
    double worst_tv = 0.0;
    int worst_iters = 0;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        const std::vector<GridMeasure> inputs{random_measure(shape, rng), random_measure(shape, rng)};
        const auto w = BarycenterWeights::pair(unif(rng));
        const auto res = constrained_barycenter(inputs, w, id, cost, AdmmConfig{});
        worst_tv = std::max(worst_tv, total_variation(res.measure, entropic_barycenter(inputs, w, cost)));
        worst_iters = std::max(worst_iters, res.state.converged ? res.state.outer_iter : 1000);
    }
    return {worst_tv <= 0.02 && worst_iters <= 2,
            fmt("worst TV %.2e, most outer iterations %d", worst_tv, worst_iters)};
}

Outcome on_manifold_fixed_point()
{
    // Non-negative atoms are learned from images that each hold one Gaussian blob.
    const GridShape shape(28, 28);
    const int atoms = 48;
    std::mt19937_64 rng(104);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    std::uniform_real_distribution<double> mag(0.5, 1.5);
    Matrix blobs(static_cast<Eigen::Index>(shape.size()), atoms);
    for (int j = 0; j < atoms; ++j) {
        const double cr = pos(rng);
        const double cc = pos(rng);
        for (std::size_t r = 0; r < shape.rows(); ++r) {
            for (std::size_t c = 0; c < shape.cols(); ++c) {
                const double dr = static_cast<double>(r) / 27.0 - cr;
                const double dc = static_cast<double>(c) / 27.0 - cc;
                blobs(static_cast<Eigen::Index>(r * 28 + c), j) = std::exp(-(dr * dr + dc * dc) / 0.01);
            }
        }
    }
    std::uniform_int_distribution<int> pick(0, atoms - 1);
    Matrix samples(static_cast<Eigen::Index>(shape.size()), 3000);
    for (Eigen::Index i = 0; i < samples.cols(); ++i) {
        samples.col(i) = mag(rng) * blobs.col(pick(rng));
    }
    auto dict = std::make_shared<const Dictionary>(learn_dictionary(samples, atoms, 1, 10, 1));

    std::vector<Eigen::Index> nonneg;
    for (Eigen::Index j = 0; j < dict->atom_count(); ++j) {
        if (dict->atoms().col(j).minCoeff() >= 0.0) {
            nonneg.push_back(j);
        }
    }
    if (nonneg.size() < 15) {
        return {false, fmt("only %zu learned atoms are non-negative", nonneg.size())};
    }

    const GroundCost cost(shape, 2e-3);
    const SparseProjector proj(dict, SparseProjectorConfig{3, 1, 0.0});
    AdmmConfig cfg;
    cfg.fixed_iters = 1;
    double worst = 0.0;
    for (int t = 0; t < 5; ++t) {
        Vector p = Vector::Zero(static_cast<Eigen::Index>(shape.size()));
        for (int s = 0; s < 3; ++s) {
            p += (0.5 + 0.3 * s) * dict->atoms().col(nonneg[static_cast<std::size_t>(3 * t + s)]);
        }
        const GridMeasure pm(shape, p / p.sum());
        const auto res = constrained_barycenter({pm, pm}, BarycenterWeights::pair(0.5), proj, cost, cfg);
        if (res.state.outer_iter != 1) {
            return {false, "more than one outer iteration"};
        }
        worst = std::max(worst, total_variation(res.measure, pm));
    }
    return {worst <= 0.02, fmt("worst TV to p over 5 measures %.4f after 1 iteration", worst)};
}

Outcome omp_exactness()
{
    std::mt19937_64 rng(105);
    const Dictionary d(two_basis_dictionary(32, rng));
    std::uniform_int_distribution<int> kdist(1, 4);
    std::uniform_real_distribution<double> mag(0.5, 1.5);
    std::bernoulli_distribution sign;
    int exact = 0;
    for (int t = 0; t < 200; ++t) {
        const int k = kdist(rng);
        const auto support = random_support(64, k, rng);
        Vector y = Vector::Zero(32);
        for (auto j : support) {
            y += (sign(rng) ? 1.0 : -1.0) * mag(rng) * d.atoms().col(j);
        }
        const auto code = omp(y, d, k);
        exact += std::set<Eigen::Index>(code.support.begin(), code.support.end()) ==
                 std::set<Eigen::Index>(support.begin(), support.end());
    }
    return {exact >= 190 && d.mutual_coherence() < 0.25,
            fmt("%d/200 exact supports, coherence %.3f", exact, d.mutual_coherence())};
}

Outcome dictionary_recovery()
{
    std::mt19937_64 rng(106);
    const Matrix planted = random_atoms(16, 64, rng);
    const Matrix samples = planted_samples(planted, 3, 2000, rng);
    const auto t0 = Clock::now();
    const Dictionary d = learn_dictionary(samples, 64, 3, 30, 2024);
    const double elapsed = seconds_since(t0);
    const double matched = matched_atom_fraction(planted, d.atoms(), 0.99);
    return {matched >= 0.8 && elapsed < 60.0,
            fmt("%.1f%% of atoms matched at correlation 0.99 in %.2f s", 100.0 * matched, elapsed)};
}

Outcome metric_properties()
{
    const GridShape line(1, 32);
    const GroundCost cost(line, 2e-3);
    std::vector<GridMeasure> moving;
    for (std::size_t i = 0; i < 5; ++i) {
        moving.push_back(GridMeasure::dirac(line, 4 + 2 * i));
    }
    const auto rep = evaluate(moving, cost, IdentityProjector{});
    const double ratio = rep.regularity / rep.total_distance;

    std::mt19937_64 rng(107);
    const GridShape square(10, 10);
    const std::vector<GridMeasure> same(6, random_measure(square, rng));
    const auto flat = evaluate(same, GroundCost(square, 2e-3), IdentityProjector{});
    return {ratio < 0.05 && flat.regularity == 0.0,
            fmt("translation regularity/total %.2e, identical-frames regularity %g", ratio, flat.regularity)};
}

Outcome mnist_ordering()
{
    const auto t0 = Clock::now();
    auto dict = std::make_shared<const Dictionary>(learn_dictionary(mnist_training_matrix(), 256, 12, 5, 1));
    const SparseProjector sparse(dict, SparseProjectorConfig{12, 10, 0.05});
    const IdentityProjector id;
    const auto test = load_idx(data_dir() / "mnist-test-images-idx3-ubyte");
    const auto labels = load_idx_labels(data_dir() / "mnist-test-labels-idx1-ubyte");
    const GroundCost cost(test.shape, 2e-3);
    AdmmConfig cfg;
    cfg.seed = 108;
    EvaluateOptions eval_opts;
    eval_opts.seed = 108;

    std::mt19937_64 rng(108);
    int closer = 0;
    double reg_constrained = 0.0;
    double reg_plain = 0.0;
    int within_ratio = 0;
    const int pairs = 20;
    for (int t = 0; t < pairs; ++t) {
        const auto label = static_cast<std::uint8_t>(t % 10);
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == label) {
                idx.push_back(i);
            }
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto a = test.measure(idx[0]);
        const auto b = test.measure(idx[1]);
        const auto plain = evaluate(morph(a, b, 9, id, cost, cfg), cost, sparse, eval_opts);
        const auto constrained = evaluate(morph(a, b, 9, sparse, cost, cfg), cost, sparse, eval_opts);
        closer += constrained.manifold_distance < plain.manifold_distance;
        within_ratio += constrained.regularity <= 3.0 * plain.regularity;
        reg_constrained += constrained.regularity;
        reg_plain += plain.regularity;
    }
    const double elapsed = seconds_since(t0);
    const double ratio = reg_constrained / reg_plain;
    return {closer >= 16 && ratio <= 3.0 && elapsed < 900.0,
            fmt("closer to the manifold on %d/%d pairs; mean regularity ratio %.2f (<= 3x on %d/%d pairs); %.0f s",
                closer, pairs, ratio, within_ratio, pairs, elapsed)};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string run_cli(const std::string& args)
{
    const std::string cmd = std::string(WBMORPH_CLI) + " " + args + " 2>&1";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    std::string out;
    if (pipe == nullptr) {
        return out;
    }
    char buf[4096];
    std::size_t got = 0;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) {
        out.append(buf, got);
    }
    out += "status=" + std::to_string(::pclose(pipe));
    return out;
}

std::string tree_bytes(const fs::path& dir)
{
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) {
        all += fs::relative(f, dir).string() + '\n' + slurp(f);
    }
    return all;
}

Outcome cli_determinism()
{
    const fs::path root = fs::temp_directory_path() / ("wbmorph-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(root);
    const std::string test = (data_dir() / "mnist-test-images-idx3-ubyte").string();
    const auto invocations = [&](const fs::path& out) {
        fs::create_directories(out);
        const std::string dict = (out / "dict.bin").string();
        std::string log;
        log += run_cli("--seed 9 learn-dict --idx " + test + " --atoms 64 --sparsity 6 --epochs 2 --out " + dict);
        log += run_cli("--seed 9 morph --a " + test + "@0 --b " + test + "@20 --frames 3 --prior sparse:" + dict +
                       " --fixed-iters 3 --out-dir " + (out / "morph").string());
        log += run_cli("--seed 9 --jobs 2 morph --a " + test + "@0 --b " + test + "@20 --frames 3 --out-dir " +
                       (out / "plain").string());
        log += run_cli("--seed 9 barycenter4 --images " + test + "@1 " + test + "@2 " + test + "@3 " + test +
                       "@4 --steps 3 --prior sparse:" + dict + " --fixed-iters 1 --out-dir " + (out / "grid").string());
        log += run_cli("--seed 9 distance --a " + test + "@5 --b " + test + "@6");
        log += run_cli("--seed 9 evaluate --frames " + (out / "morph").string() + " --prior sparse:" + dict);
        return log + tree_bytes(out);
    };
    const std::string first = invocations(root / "a");
    const std::string second = invocations(root / "b");
    fs::remove_all(root);
    std::size_t ok_runs = 0;
    for (auto at = first.find("status=0"); at != std::string::npos; at = first.find("status=0", at + 1)) {
        ++ok_runs;
    }
    const bool ran = ok_runs == 6;
    return {ran && first == second && !first.empty(),
            fmt("6 invocations repeated, %zu bytes of output compared", first.size())};
}

Outcome external_protocol()
{
    std::mt19937_64 rng(110);
    const GridShape shape(12, 12);
    const GroundCost cost(shape, 2e-3);
    const ExternalProjector echo(std::string(WBMORPH_ECHO_PROJECTOR) + " echo");
    const IdentityProjector id;
    const std::vector<GridMeasure> inputs{random_measure(shape, rng), random_measure(shape, rng)};
    AdmmConfig cfg;
    cfg.fixed_iters = 3;
    const auto a = constrained_barycenter(inputs, BarycenterWeights::pair(0.3), echo, cost, cfg);
    const auto b = constrained_barycenter(inputs, BarycenterWeights::pair(0.3), id, cost, cfg);
    const bool identical = a.measure.mass() == b.measure.mass() && a.state.u == b.state.u;

    int violations = 0;
    for (const char* mode : {"short", "nan"}) {
        try {
            ExternalProjector(std::string(WBMORPH_ECHO_PROJECTOR) + " " + mode).project_raw(inputs[0].mass(), 0);
        } catch (const Error& e) {
            violations += e.code() == ErrorCode::ProtocolViolation;
        }
    }
    return {identical && violations == 2,
            fmt("echo run %s the identity run; %d/2 malformed replies raised ProtocolViolation",
                identical ? "matches" : "differs from", violations)};
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"Sinkhorn vs exact LP on 4x4", sinkhorn_vs_lp},
        {"Dirac interpolation", dirac_interpolation},
        {"unconstrained reduction", unconstrained_reduction},
        {"on-manifold fixed point", on_manifold_fixed_point},
        {"OMP exactness", omp_exactness},
        {"planted dictionary recovery", dictionary_recovery},
        {"metric properties", metric_properties},
        {"MNIST ordering", mnist_ordering},
        {"CLI determinism", cli_determinism},
        {"external projector protocol", external_protocol},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed;
}
