#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sbd/denoise.hpp"
#include "sbd/error.hpp"
#include "sbd/image_io.hpp"

namespace sbd {

namespace {

namespace fs = std::filesystem;

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
}

class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned long> counter{0};
        const auto base = fs::temp_directory_path();
        for (int attempt = 0; attempt < 100; ++attempt) {
            const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
            path_ = base / ("sbd-ext-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
                            std::to_string(stamp % 1000000));
            std::error_code ec;
            if (fs::create_directory(path_, ec)) return;
        }
        throw IoError("cannot create temporary directory in " + base.string());
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

struct RunResult {
    int status = 0;
    bool timed_out = false;
    std::string stderr_text;
};

RunResult run_shell(const std::string& command, std::chrono::milliseconds timeout) {
    int pipe_fd[2];
    if (::pipe(pipe_fd) != 0) throw IoError(std::string("pipe failed: ") + std::strerror(errno));

    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(pipe_fd[0]);
        ::close(pipe_fd[1]);
        throw IoError(std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(pipe_fd[1], STDERR_FILENO);
        ::close(pipe_fd[0]);
        ::close(pipe_fd[1]);
        const int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    ::close(pipe_fd[1]);

    RunResult result;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    bool open = true;
    char buffer[4096];
    while (open) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            result.timed_out = true;
            break;
        }
        pollfd pfd{pipe_fd[0], POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 100)));
        if (ready < 0 && errno != EINTR) break;
        if (ready > 0) {
            const ssize_t n = ::read(pipe_fd[0], buffer, sizeof buffer);
            if (n > 0) {
                if (result.stderr_text.size() < (1u << 16)) result.stderr_text.append(buffer, static_cast<std::size_t>(n));
            } else {
                open = false;
            }
        }
    }

    int status = 0;
    if (!result.timed_out) {
        // stderr closed; the child may still be running with it detached.
        while (true) {
            const pid_t done = ::waitpid(pid, &status, WNOHANG);
            if (done == pid) break;
            if (std::chrono::steady_clock::now() >= deadline) {
                result.timed_out = true;
                break;
            }
            ::usleep(10000);
        }
    }
    if (result.timed_out) {
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL);
        ::waitpid(pid, &status, 0);
    }
    ::close(pipe_fd[0]);

    if (WIFEXITED(status)) result.status = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) result.status = 128 + WTERMSIG(status);
    return result;
}

}  // namespace

Image external_denoise(const Image& img, const std::string& command, std::chrono::milliseconds timeout) {
    if (command.empty()) throw ParameterError("external denoiser needs a command");
    const TempDir dir;
    const auto in_path = dir.path() / "in.f32img";
    const auto out_path = dir.path() / "out.f32img";
    write_image(img, in_path);

    std::string cmd = command;
    if (cmd.find("{in}") == std::string::npos && cmd.find("{out}") == std::string::npos) cmd += " {in} {out}";
    replace_all(cmd, "{in}", shell_quote(in_path.string()));
    replace_all(cmd, "{out}", shell_quote(out_path.string()));

    const auto run = run_shell(cmd, timeout);
    if (run.timed_out) {
        throw TimeoutError("external denoiser timed out after " + std::to_string(timeout.count()) + " ms: " + command);
    }
    if (run.status != 0) {
        throw ExternalError("external denoiser exited with status " + std::to_string(run.status) + ": " +
                            run.stderr_text);
    }
    if (!fs::exists(out_path)) throw ProtocolError("external denoiser produced no output file");

    Image out;
    try {
        out = read_image(out_path);
    } catch (const Error& e) {
        throw ProtocolError(std::string("external denoiser output unreadable: ") + e.what());
    }
    if (!out.same_shape(img)) {
        throw ProtocolError("external denoiser output is " + std::to_string(out.width()) + "x" +
                            std::to_string(out.height()) + ", expected " + std::to_string(img.width()) + "x" +
                            std::to_string(img.height()));
    }
    if (out.pixel_size() == 0.0) out.set_pixel_size(img.pixel_size());
    return out;
}

}  // namespace sbd
