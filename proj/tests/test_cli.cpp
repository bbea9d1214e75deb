#include "test_support.hpp"
#include "wbmorph/io.hpp"

#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sys/wait.h>
#include <unistd.h>

using namespace wbmorph;
using namespace wbmorph::testing;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir()
    {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("wbmorph-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Run {
    int status = -1;
    std::string out;
};

Run cli(const std::string& args)
{
    const std::string cmd = std::string(WBMORPH_CLI) + " " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t got = 0;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) {
        r.out.append(buf.data(), got);
    }
    const int status = ::pclose(pipe);
    r.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> listing(const fs::path& dir)
{
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
        names.push_back(e.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

bool same_tree(const fs::path& a, const fs::path& b)
{
    if (listing(a) != listing(b)) {
        return false;
    }
    for (const auto& name : listing(a)) {
        if (slurp(a / name) != slurp(b / name)) {
            return false;
        }
    }
    return true;
}

double value_of(const std::string& text, const std::string& key)
{
    const auto pos = text.find(key + "=");
    REQUIRE(pos != std::string::npos);
    return std::stod(text.substr(pos + key.size() + 1));
}

const std::string kTest = (data_dir() / "mnist-test-images-idx3-ubyte").string();

std::string digit(int index)
{
    return kTest + "@" + std::to_string(index);
}

}  // namespace

TEST_CASE("morph writes N + 2 frames and a metrics file that evaluate reproduces")
{
    TempDir dir;
    const auto r = cli("morph --a " + digit(0) + " --b " + digit(10) + " --frames 3 --out-dir " + dir / "m");
    REQUIRE(r.status == 0);
    CHECK(listing(dir / "m") == std::vector<std::string>{"frame_000.pgm", "frame_001.pgm", "frame_002.pgm",
                                                          "frame_003.pgm", "frame_004.pgm", "metrics.txt"});
    const auto ev = cli("evaluate --frames " + dir / "m");
    REQUIRE(ev.status == 0);
    CHECK(ev.out == slurp(dir.path / "m" / "metrics.txt"));
    CHECK(value_of(ev.out, "total_distance") > 0.0);

    // Endpoints are written from the inputs themselves.
    const auto ds = load_idx(kTest);
    CHECK(slurp(dir.path / "m" / "frame_000.pgm") ==
          std::string([&] { auto e = encode_pgm(ds.measure(0)); return std::string(e.begin(), e.end()); }()));
}

TEST_CASE("distance of an image to itself is within the entropic slack")
{
    const auto r = cli("distance --a " + digit(3) + " --b " + digit(3));
    REQUIRE(r.status == 0);
    CHECK(value_of(r.out, "sharp_cost") <= 2.0 * 2e-3 * std::log(784.0));
    CHECK(value_of(r.out, "converged") == 1.0);
    const auto other = cli("distance --a " + digit(3) + " --b " + digit(4) + " --epsilon 0.004");
    REQUIRE(other.status == 0);
    CHECK(value_of(other.out, "sharp_cost") > value_of(r.out, "sharp_cost"));
}

TEST_CASE("sparse prior: dictionary learning, morph, determinism")
{
    TempDir dir;
    const auto learn = cli("learn-dict --idx " + kTest + " --atoms 32 --sparsity 4 --epochs 1 --seed 3 --out " +
                           dir / "d.bin");
    REQUIRE(learn.status == 0);
    const auto dict = load_dictionary(dir / "d.bin");
    CHECK(dict.atom_dim() == 784);
    CHECK(dict.atom_count() == 32);
    const auto again = cli("learn-dict --idx " + kTest + " --atoms 32 --sparsity 4 --epochs 1 --seed 3 --out " +
                           dir / "d2.bin");
    REQUIRE(again.status == 0);
    CHECK(slurp(dir / "d.bin") == slurp(dir / "d2.bin"));

    const std::string common = "--a " + digit(1) + " --b " + digit(11) + " --frames 2 --prior sparse:" +
                               dir / "d.bin" + " --fixed-iters 2";
    REQUIRE(cli("morph " + common + " --seed 5 --out-dir " + dir / "s1").status == 0);
    REQUIRE(cli("morph " + common + " --seed 5 --out-dir " + dir / "s2").status == 0);
    REQUIRE(cli("--jobs 2 morph " + common + " --seed 5 --out-dir " + dir / "s3").status == 0);
    CHECK(same_tree(dir / "s1", dir / "s2"));
    CHECK(same_tree(dir / "s1", dir / "s3"));
    REQUIRE(cli("morph " + common + " --seed 6 --out-dir " + dir / "s4").status == 0);
    CHECK_FALSE(same_tree(dir / "s1", dir / "s4"));

    const auto ev = cli("evaluate --frames " + dir / "s1" + " --prior sparse:" + dir / "d.bin" + " --seed 5");
    CHECK(ev.out == slurp(dir.path / "s1" / "metrics.txt"));
}

TEST_CASE("external prior: echo process matches the unconstrained morph")
{
    TempDir dir;
    const std::string common = "--a " + digit(2) + " --b " + digit(12) + " --frames 2 --fixed-iters 2";
    REQUIRE(cli("morph " + common + " --out-dir " + dir / "plain").status == 0);
    REQUIRE(cli("morph " + common + " --prior 'external:" + std::string(WBMORPH_ECHO_PROJECTOR) +
                " echo' --out-dir " + dir / "echo")
                .status == 0);
    for (const auto& name : listing(dir / "plain")) {
        if (name != "metrics.txt") {
            CHECK(slurp(dir.path / "plain" / name) == slurp(dir.path / "echo" / name));
        }
    }
    const auto bad = cli("morph " + common + " --prior 'external:" + std::string(WBMORPH_ECHO_PROJECTOR) +
                         " short' --out-dir " + dir / "bad");
    CHECK(bad.status == 4);
}

TEST_CASE("barycenter4 writes the lattice")
{
    TempDir dir;
    const auto r = cli("barycenter4 --images " + digit(0) + " " + digit(1) + " " + digit(2) + " " + digit(3) +
                       " --steps 3 --fixed-iters 1 --out-dir " + dir / "grid");
    REQUIRE(r.status == 0);
    const auto names = listing(dir / "grid");
    CHECK(names.size() == 9);
    const auto ds = load_idx(kTest);
    const auto corner = encode_pgm(ds.measure(3));
    CHECK(slurp(dir.path / "grid" / "cell_02_02.pgm") == std::string(corner.begin(), corner.end()));
}

TEST_CASE("configuration file and flag precedence")
{
    TempDir dir;
    {
        std::ofstream(dir / "cfg.txt") << "epsilon=0.004\n";
        std::ofstream(dir / "bad.txt") << "epsilon=0.004\nflavour=mint\n";
    }
    const auto base = cli("distance --a " + digit(5) + " --b " + digit(6) + " --epsilon 0.004");
    const auto from_file = cli("--config " + dir / "cfg.txt" + " distance --a " + digit(5) + " --b " + digit(6));
    REQUIRE(base.status == 0);
    CHECK(from_file.out == base.out);
    const auto overridden = cli("--config " + dir / "cfg.txt" + " distance --a " + digit(5) + " --b " + digit(6) +
                                " --epsilon 0.002");
    CHECK(overridden.out == cli("distance --a " + digit(5) + " --b " + digit(6)).out);
    CHECK(cli("--config " + dir / "bad.txt" + " distance --a " + digit(5) + " --b " + digit(6)).status == 2);
}

TEST_CASE("exit codes")
{
    TempDir dir;
    CHECK(cli("").status == 2);
    CHECK(cli("morph --a " + digit(0)).status == 2);
    CHECK(cli("distance --a " + digit(0) + " --b " + digit(1) + " --mu -1").status == 2);
    CHECK(cli("morph --a " + digit(0) + " --b " + digit(1) + " --prior fancy --out-dir " + dir / "x").status == 2);
    CHECK(cli("distance --a " + dir / "missing.pgm" + " --b " + digit(1)).status == 3);
    CHECK(cli("distance --a " + (data_dir() / "mnist-test-labels-idx1-ubyte").string() + "@0 --b " + digit(1))
              .status == 3);
    CHECK(cli("morph --a " + digit(0) + " --b " + digit(1) + " --prior external:/nonexistent/tool --out-dir " +
              dir / "y")
              .status == 4);

    const GridShape big(65, 65);
    write_pgm(GridMeasure(big, Vector::Constant(65 * 65, 1.0 / (65 * 65))), dir / "big.pgm");
    CHECK(cli("distance --a " + dir / "big.pgm" + " --b " + dir / "big.pgm").status == 2);
    CHECK(cli("--allow-large distance --a " + dir / "big.pgm" + " --b " + dir / "big.pgm").status == 0);
    CHECK(cli("distance --a " + digit(0) + " --b " + dir / "big.pgm" + " --allow-large").status == 2);
}
