// Stand-in external projector speaking the OTPROJ01 protocol on stdin/stdout.
//
//   echo_projector [echo|short|nan|hang|quit]
//
// echo  answers every request with the values it received
// short answers with one value fewer than requested
// nan   answers with the first value replaced by NaN
// hang  reads requests and never answers
// quit  exits after reading the first request

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>
#include <thread>
#include <vector>

namespace {

bool read_exact(void* buf, std::size_t len)
{
    return std::fread(buf, 1, len, stdin) == len;
}

void write_exact(const void* buf, std::size_t len)
{
    std::fwrite(buf, 1, len, stdout);
}

}  // namespace

int main(int argc, char** argv)
{
    const std::string mode = argc > 1 ? argv[1] : "echo";
    for (;;) {
        char magic[8];
        if (!read_exact(magic, sizeof magic)) {
            return 0;
        }
        if (std::memcmp(magic, "OTPROJ01", 8) != 0) {
            return 1;
        }
        std::uint32_t n = 0;
        if (!read_exact(&n, sizeof n)) {
            return 1;
        }
        std::vector<double> values(n);
        if (n > 0 && !read_exact(values.data(), n * sizeof(double))) {
            return 1;
        }
        if (mode == "quit") {
            return 0;
        }
        if (mode == "hang") {
            std::this_thread::sleep_for(std::chrono::hours(1));
        }
        if (mode == "short" && n > 0) {
            values.pop_back();
        }
        if (mode == "nan" && n > 0) {
            values[0] = std::numeric_limits<double>::quiet_NaN();
        }
        const auto out_n = static_cast<std::uint32_t>(values.size());
        write_exact(&out_n, sizeof out_n);
        write_exact(values.data(), values.size() * sizeof(double));
        std::fflush(stdout);
    }
}
