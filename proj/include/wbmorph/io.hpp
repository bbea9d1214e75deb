#pragma once

#include "wbmorph/measure.hpp"
#include "wbmorph/sparse.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace wbmorph {

/// Unsigned-byte image stack from an IDX file (magic 0x00000803).
struct IdxDataset {
    std::size_t count = 0;
    GridShape shape{1, 1};
    std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major per image

    std::vector<double> image(std::size_t index) const;
    GridMeasure measure(std::size_t index) const;
};

IdxDataset load_idx(const std::filesystem::path& path);
void write_idx(const IdxDataset& data, const std::filesystem::path& path);

/// Label file (magic 0x00000801).
std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path);

/// Binary PGM ("P5", maxval 255); pixel = round(255 * (m / max m)^gamma).
void write_pgm(const GridMeasure& measure, const std::filesystem::path& path, double gamma = 1.0);
std::vector<std::uint8_t> encode_pgm(const GridMeasure& measure, double gamma = 1.0);

struct GrayImage {
    GridShape shape{1, 1};
    std::vector<double> pixels;
};

/// Reads P5 (binary) or P2 (ASCII) greymaps; values are returned unscaled.
GrayImage read_pgm(const std::filesystem::path& path);

/// "OTDICT01", u32 n, u32 m, n*m float64 little-endian, column-major.
void save_dictionary(const Dictionary& dict, const std::filesystem::path& path);
Dictionary load_dictionary(const std::filesystem::path& path);

/// Tunables shared by the command-line tools. Text form is one `key=value`
/// per line; blank lines and `#` comments are ignored, unknown keys rejected.
struct RunConfig {
    double epsilon = 2e-3;
    double mu = 0.05;
    std::optional<double> stop_tol;
    int max_outer_iters = 20;
    std::optional<int> fixed_iters;
    int n_frames = 9;
    int sparsity = 12;
    int atoms = 256;
    int mmse_passes = 10;
    double noise_sigma = 0.05;  // relative to max(y)
    std::uint64_t seed = 0;

    void set(const std::string& key, const std::string& value);
    void validate() const;

    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);
};

}  // namespace wbmorph
