#include "wbmorph/error.hpp"
#include "wbmorph/projector.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

extern char** environ;

namespace wbmorph {

namespace {

static_assert(std::endian::native == std::endian::little, "wire protocol assumes a little-endian host");

constexpr std::array<char, 8> kMagic{'O', 'T', 'P', 'R', 'O', 'J', '0', '1'};

using Clock = std::chrono::steady_clock;

int remaining_ms(Clock::time_point deadline)
{
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    return left.count() > 0 ? static_cast<int>(left.count()) : 0;
}

}  // namespace

struct ExternalProjector::Child {
    pid_t pid = -1;
    int to_child = -1;
    int from_child = -1;

    Child(const std::string& command)
    {
        // A dead reader must surface as EPIPE, not terminate the process.
        struct sigaction current {};
        if (sigaction(SIGPIPE, nullptr, &current) == 0 && current.sa_handler == SIG_DFL) {
            std::signal(SIGPIPE, SIG_IGN);
        }

        int in_pipe[2];
        int out_pipe[2];
        if (pipe2(in_pipe, O_CLOEXEC) != 0) {
            throw Error(ErrorCode::ProcessUnavailable, std::strerror(errno));
        }
        if (pipe2(out_pipe, O_CLOEXEC) != 0) {
            ::close(in_pipe[0]);
            ::close(in_pipe[1]);
            throw Error(ErrorCode::ProcessUnavailable, std::strerror(errno));
        }

        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
        posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

        std::string cmd = command;
        char sh[] = "/bin/sh";
        char dash_c[] = "-c";
        char* argv[] = {sh, dash_c, cmd.data(), nullptr};
        // Own process group, so a stuck child can be killed together with
        // anything the shell started.
        posix_spawnattr_t attr;
        posix_spawnattr_init(&attr);
        posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
        posix_spawnattr_setpgroup(&attr, 0);
        const int rc = posix_spawn(&pid, "/bin/sh", &actions, &attr, argv, environ);
        posix_spawnattr_destroy(&attr);
        posix_spawn_file_actions_destroy(&actions);
        ::close(in_pipe[0]);
        ::close(out_pipe[1]);
        if (rc != 0) {
            ::close(in_pipe[1]);
            ::close(out_pipe[0]);
            throw Error(ErrorCode::ProcessUnavailable, "cannot start '" + command + "': " + std::strerror(rc));
        }
        to_child = in_pipe[1];
        from_child = out_pipe[0];
    }

    ~Child()
    {
        if (to_child >= 0) {
            ::close(to_child);
        }
        if (from_child >= 0) {
            ::close(from_child);
        }
        if (pid > 0) {
            // Give the child a moment to exit on EOF before killing it.
            int status = 0;
            for (int i = 0; i < 50; ++i) {
                if (waitpid(pid, &status, WNOHANG) == pid) {
                    return;
                }
                usleep(2000);
            }
            kill(-pid, SIGKILL);
            waitpid(pid, &status, 0);
        }
    }

    Child(const Child&) = delete;
    Child& operator=(const Child&) = delete;

    void write_all(const void* data, std::size_t len, Clock::time_point deadline) const
    {
        const auto* p = static_cast<const char*>(data);
        while (len > 0) {
            pollfd pfd{to_child, POLLOUT, 0};
            const int ready = poll(&pfd, 1, remaining_ms(deadline));
            if (ready == 0) {
                throw Error(ErrorCode::Timeout, "external projector did not accept input in time");
            }
            if (ready < 0) {
                if (errno == EINTR) {
                    continue;
                }
                throw Error(ErrorCode::ProcessUnavailable, std::strerror(errno));
            }
            const ssize_t w = ::write(to_child, p, len);
            if (w < 0) {
                if (errno == EINTR || errno == EAGAIN) {
                    continue;
                }
                throw Error(ErrorCode::ProcessUnavailable, "external projector closed its input");
            }
            p += w;
            len -= static_cast<std::size_t>(w);
        }
    }

    void read_all(void* data, std::size_t len, Clock::time_point deadline) const
    {
        auto* p = static_cast<char*>(data);
        const std::size_t wanted = len;
        while (len > 0) {
            pollfd pfd{from_child, POLLIN, 0};
            const int ready = poll(&pfd, 1, remaining_ms(deadline));
            if (ready == 0) {
                throw Error(ErrorCode::Timeout, "external projector did not answer in time");
            }
            if (ready < 0) {
                if (errno == EINTR) {
                    continue;
                }
                throw Error(ErrorCode::ProcessUnavailable, std::strerror(errno));
            }
            const ssize_t r = ::read(from_child, p, len);
            if (r < 0) {
                if (errno == EINTR || errno == EAGAIN) {
                    continue;
                }
                throw Error(ErrorCode::ProcessUnavailable, std::strerror(errno));
            }
            if (r == 0) {
                if (len == wanted) {
                    throw Error(ErrorCode::ProcessUnavailable, "external projector exited");
                }
                throw Error(ErrorCode::ProtocolViolation, "external projector response truncated");
            }
            p += r;
            len -= static_cast<std::size_t>(r);
        }
    }
};

ExternalProjector::ExternalProjector(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout)
{
    if (command_.empty()) {
        throw Error(ErrorCode::InvalidArgument, "external projector command is empty");
    }
}

ExternalProjector::~ExternalProjector() = default;

Vector ExternalProjector::project_raw(const Vector& y, std::uint64_t) const
{
    std::lock_guard lock(mutex_);
    if (!child_) {
        child_ = std::make_unique<Child>(command_);
    }
    const auto n = static_cast<std::uint32_t>(y.size());
    const auto deadline = Clock::now() + timeout_;
    try {
        std::vector<char> request(kMagic.size() + sizeof(n) + sizeof(double) * n);
        std::memcpy(request.data(), kMagic.data(), kMagic.size());
        std::memcpy(request.data() + kMagic.size(), &n, sizeof(n));
        std::memcpy(request.data() + kMagic.size() + sizeof(n), y.data(), sizeof(double) * n);
        child_->write_all(request.data(), request.size(), deadline);

        std::uint32_t got = 0;
        child_->read_all(&got, sizeof(got), deadline);
        if (got != n) {
            throw Error(ErrorCode::ProtocolViolation, "external projector answered with " +
                                                          std::to_string(got) + " values, expected " +
                                                          std::to_string(n));
        }
        Vector out(static_cast<Eigen::Index>(n));
        child_->read_all(out.data(), sizeof(double) * n, deadline);
        if (!out.allFinite()) {
            throw Error(ErrorCode::ProtocolViolation, "external projector returned non-finite values");
        }
        return out;
    } catch (const Error&) {
        // The stream is out of sync; start over on the next call.
        child_.reset();
        throw;
    }
}

Vector project_external(const Vector& y, const ExternalProjector& endpoint)
{
    const Vector raw = endpoint.project_raw(y, 0);
    Vector v = raw.cwiseMax(0.0);
    const double total = v.sum();
    if (!(total > 0.0)) {
        throw Error(ErrorCode::AllZeroInput, "external projection has no positive mass");
    }
    return v / total;
}

}  // namespace wbmorph
