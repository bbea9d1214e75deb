#include "wbmorph/io.hpp"

#include "wbmorph/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace wbmorph {

namespace {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

std::vector<std::uint8_t> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw Error(ErrorCode::IoError, "cannot read " + path.string());
    }
    return data;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& data)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot create " + path.string());
    }
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& d, std::size_t off)
{
    return (std::uint32_t{d[off]} << 24) | (std::uint32_t{d[off + 1]} << 16) |
           (std::uint32_t{d[off + 2]} << 8) | std::uint32_t{d[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& d, std::uint32_t v)
{
    d.push_back(static_cast<std::uint8_t>(v >> 24));
    d.push_back(static_cast<std::uint8_t>(v >> 16));
    d.push_back(static_cast<std::uint8_t>(v >> 8));
    d.push_back(static_cast<std::uint8_t>(v));
}

template <typename T>
void put_le(std::vector<std::uint8_t>& d, T v)
{
    std::array<std::uint8_t, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &v, sizeof(T));
    d.insert(d.end(), bytes.begin(), bytes.end());
}

template <typename T>
T get_le(const std::vector<std::uint8_t>& d, std::size_t off)
{
    T v{};
    std::memcpy(&v, d.data() + off, sizeof(T));
    return v;
}

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
constexpr char kDictMagic[8] = {'O', 'T', 'D', 'I', 'C', 'T', '0', '1'};

}  // namespace

std::vector<double> IdxDataset::image(std::size_t index) const
{
    if (index >= count) {
        throw Error(ErrorCode::IndexOutOfRange, "image index " + std::to_string(index) + " out of range");
    }
    const std::size_t n = shape.size();
    const auto first = pixels.begin() + static_cast<std::ptrdiff_t>(index * n);
    return {first, first + static_cast<std::ptrdiff_t>(n)};
}

GridMeasure IdxDataset::measure(std::size_t index) const
{
    return normalize_to_measure(image(index), shape);
}

IdxDataset load_idx(const std::filesystem::path& path)
{
    const auto data = read_file(path);
    if (data.size() < 4) {
        throw Error(ErrorCode::TruncatedFile, path.string() + " has no IDX header");
    }
    const std::uint32_t magic = read_be32(data, 0);
    if (magic != kIdxImageMagic) {
        std::ostringstream msg;
        msg << path.string() << ": magic 0x" << std::hex << magic << ", expected 0x803";
        throw Error(ErrorCode::BadMagic, msg.str());
    }
    if (data.size() < 16) {
        throw Error(ErrorCode::TruncatedFile, path.string() + " header is truncated");
    }
    const std::size_t count = read_be32(data, 4);
    const std::size_t rows = read_be32(data, 8);
    const std::size_t cols = read_be32(data, 12);
    if (rows == 0 || cols == 0) {
        throw Error(ErrorCode::BadMagic, path.string() + " declares an empty image size");
    }
    const std::size_t payload = count * rows * cols;
    if (data.size() - 16 < payload) {
        throw Error(ErrorCode::TruncatedFile, path.string() + " payload is shorter than declared");
    }
    IdxDataset out;
    out.count = count;
    out.shape = GridShape(rows, cols);
    out.pixels.assign(data.begin() + 16, data.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
    return out;
}

void write_idx(const IdxDataset& data, const std::filesystem::path& path)
{
    if (data.pixels.size() != data.count * data.shape.size()) {
        throw Error(ErrorCode::ShapeMismatch, "IDX payload does not match count x rows x cols");
    }
    std::vector<std::uint8_t> bytes;
    bytes.reserve(16 + data.pixels.size());
    put_be32(bytes, kIdxImageMagic);
    put_be32(bytes, static_cast<std::uint32_t>(data.count));
    put_be32(bytes, static_cast<std::uint32_t>(data.shape.rows()));
    put_be32(bytes, static_cast<std::uint32_t>(data.shape.cols()));
    bytes.insert(bytes.end(), data.pixels.begin(), data.pixels.end());
    write_file(path, bytes);
}

std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path)
{
    const auto data = read_file(path);
    if (data.size() < 8) {
        throw Error(ErrorCode::TruncatedFile, path.string() + " has no IDX header");
    }
    if (read_be32(data, 0) != kIdxLabelMagic) {
        throw Error(ErrorCode::BadMagic, path.string() + " is not an IDX label file");
    }
    const std::size_t count = read_be32(data, 4);
    if (data.size() - 8 < count) {
        throw Error(ErrorCode::TruncatedFile, path.string() + " payload is shorter than declared");
    }
    return {data.begin() + 8, data.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

std::vector<std::uint8_t> encode_pgm(const GridMeasure& measure, double gamma)
{
    if (!(gamma > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "gamma must be positive");
    }
    const std::string header = "P5\n" + std::to_string(measure.shape().cols()) + " " +
                               std::to_string(measure.shape().rows()) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    const double peak = measure.mass().maxCoeff();
    for (std::size_t i = 0; i < measure.size(); ++i) {
        const double rel = peak > 0.0 ? measure[i] / peak : 0.0;
        const double v = std::round(255.0 * std::pow(rel, gamma));
        bytes.push_back(static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0)));
    }
    return bytes;
}

void write_pgm(const GridMeasure& measure, const std::filesystem::path& path, double gamma)
{
    write_file(path, encode_pgm(measure, gamma));
}

GrayImage read_pgm(const std::filesystem::path& path)
{
    const auto data = read_file(path);
    std::size_t pos = 0;
    auto next_token = [&]() {
        for (;;) {
            while (pos < data.size() && std::isspace(data[pos])) {
                ++pos;
            }
            if (pos < data.size() && data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n') {
                    ++pos;
                }
                continue;
            }
            break;
        }
        std::string tok;
        while (pos < data.size() && !std::isspace(data[pos])) {
            tok.push_back(static_cast<char>(data[pos++]));
        }
        if (tok.empty()) {
            throw Error(ErrorCode::TruncatedFile, path.string() + ": incomplete PGM header");
        }
        return tok;
    };
    auto next_int = [&]() {
        const std::string tok = next_token();
        try {
            return std::stoul(tok);
        } catch (const std::exception&) {
            throw Error(ErrorCode::BadMagic, path.string() + ": malformed PGM header");
        }
    };

    const std::string magic = next_token();
    if (magic != "P5" && magic != "P2") {
        throw Error(ErrorCode::BadMagic, path.string() + " is not a PGM greymap");
    }
    const std::size_t cols = next_int();
    const std::size_t rows = next_int();
    const std::size_t maxval = next_int();
    if (maxval == 0 || maxval > 65535) {
        throw Error(ErrorCode::BadMagic, path.string() + ": invalid PGM maxval");
    }
    GrayImage img{GridShape(rows, cols), {}};
    const std::size_t n = rows * cols;
    img.pixels.reserve(n);
    if (magic == "P2") {
        for (std::size_t i = 0; i < n; ++i) {
            img.pixels.push_back(static_cast<double>(next_int()));
        }
        return img;
    }
    ++pos;  // single whitespace after maxval
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    if (data.size() < pos + n * bpp) {
        throw Error(ErrorCode::TruncatedFile, path.string() + ": PGM raster is truncated");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = pos + i * bpp;
        const unsigned v = bpp == 1 ? data[off] : (unsigned{data[off]} << 8) | data[off + 1];
        img.pixels.push_back(static_cast<double>(v));
    }
    return img;
}

void save_dictionary(const Dictionary& dict, const std::filesystem::path& path)
{
    std::vector<std::uint8_t> bytes(std::begin(kDictMagic), std::end(kDictMagic));
    put_le(bytes, static_cast<std::uint32_t>(dict.atom_dim()));
    put_le(bytes, static_cast<std::uint32_t>(dict.atom_count()));
    const Matrix& a = dict.atoms();  // Eigen default storage is column-major
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            put_le(bytes, a(r, c));
        }
    }
    write_file(path, bytes);
}

Dictionary load_dictionary(const std::filesystem::path& path)
{
    const auto data = read_file(path);
    if (data.size() < 16) {
        throw Error(ErrorCode::TruncatedFile, path.string() + " has no dictionary header");
    }
    if (std::memcmp(data.data(), kDictMagic, sizeof(kDictMagic)) != 0) {
        throw Error(ErrorCode::BadMagic, path.string() + " is not a dictionary file");
    }
    const auto n = get_le<std::uint32_t>(data, 8);
    const auto m = get_le<std::uint32_t>(data, 12);
    const std::size_t need = 16 + std::size_t{n} * m * sizeof(double);
    if (data.size() < need) {
        throw Error(ErrorCode::TruncatedFile, path.string() + " dictionary payload is truncated");
    }
    Matrix atoms(n, m);
    std::size_t off = 16;
    for (Eigen::Index c = 0; c < atoms.cols(); ++c) {
        for (Eigen::Index r = 0; r < atoms.rows(); ++r) {
            atoms(r, c) = get_le<double>(data, off);
            off += sizeof(double);
        }
    }
    return Dictionary(std::move(atoms));
}

namespace {

double parse_double(const std::string& key, const std::string& value)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::InvalidArgument, "'" + key + "' expects a number, got '" + value + "'");
    }
    return v;
}

long long parse_int(const std::string& key, const std::string& value)
{
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size()) {
        throw Error(ErrorCode::InvalidArgument, "'" + key + "' expects an integer, got '" + value + "'");
    }
    return v;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value)
{
    if (key == "epsilon") {
        epsilon = parse_double(key, value);
    } else if (key == "mu") {
        mu = parse_double(key, value);
    } else if (key == "stop_tol") {
        stop_tol = parse_double(key, value);
    } else if (key == "max_outer_iters") {
        max_outer_iters = static_cast<int>(parse_int(key, value));
    } else if (key == "fixed_iters") {
        fixed_iters = static_cast<int>(parse_int(key, value));
    } else if (key == "n_frames") {
        n_frames = static_cast<int>(parse_int(key, value));
    } else if (key == "sparsity") {
        sparsity = static_cast<int>(parse_int(key, value));
    } else if (key == "atoms") {
        atoms = static_cast<int>(parse_int(key, value));
    } else if (key == "mmse_passes") {
        mmse_passes = static_cast<int>(parse_int(key, value));
    } else if (key == "noise_sigma") {
        noise_sigma = parse_double(key, value);
    } else if (key == "seed") {
        const long long s = parse_int(key, value);
        if (s < 0) {
            throw Error(ErrorCode::InvalidArgument, "seed must be non-negative");
        }
        seed = static_cast<std::uint64_t>(s);
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown configuration key '" + key + "'");
    }
}

void RunConfig::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw Error(ErrorCode::InvalidArgument, what);
        }
    };
    require(epsilon > 0.0, "epsilon must be positive");
    require(mu > 0.0, "mu must be positive");
    require(!stop_tol || *stop_tol > 0.0, "stop_tol must be positive");
    require(max_outer_iters >= 0, "max_outer_iters must be non-negative");
    require(!fixed_iters || *fixed_iters >= 1, "fixed_iters must be at least 1");
    require(n_frames >= 1, "n_frames must be at least 1");
    require(sparsity >= 1, "sparsity must be at least 1");
    require(atoms >= 1, "atoms must be at least 1");
    require(mmse_passes >= 1, "mmse_passes must be at least 1");
    require(noise_sigma >= 0.0, "noise_sigma must be non-negative");
}

RunConfig RunConfig::parse(const std::string& text)
{
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        line = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(lineno) + ": expected key=value");
        }
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path)
{
    const auto bytes = read_file(path);
    return parse(std::string(bytes.begin(), bytes.end()));
}

}  // namespace wbmorph
