#pragma once

// Bridge to models that run as separate executables.
//
// One child process per model stays alive for the whole run. Each evaluation
// writes a single JSON line {"id": k, "inputs": [...]} to the child's stdin
// and waits for one line {"id": k, "output": y} on its stdout. Requests are
// strictly sequential. The child's stderr is drained continuously and the
// tail is attached to any error so solver diagnostics are not lost.

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "lfmc/errors.hpp"

namespace lfmc {

struct ExternalModelSpec {
    std::vector<std::string> command;         // executable followed by its arguments
    std::vector<std::size_t> input_indices;   // projection from the global input vector
    double timeout = 60.0;                    // seconds per evaluation
    double tau = 1.0;                         // relative cost, LF models only

    bool operator==(const ExternalModelSpec&) const = default;
};

class ExternalModel {
public:
    explicit ExternalModel(ExternalModelSpec spec) : spec_(std::move(spec)) {
        if (spec_.command.empty()) throw InputError("external model command is empty");
        if (!(spec_.timeout > 0.0)) throw InputError("external model timeout must be positive");
        spawn();
    }

    ExternalModel(const ExternalModel&) = delete;
    ExternalModel& operator=(const ExternalModel&) = delete;

    ~ExternalModel() { shutdown(); }

    [[nodiscard]] const ExternalModelSpec& spec() const { return spec_; }
    [[nodiscard]] long requests() const { return next_id_; }

    /// Sends one request and blocks for its reply.
    double evaluate(std::span<const double> inputs) {
        if (pid_ <= 0) throw ModelEvaluationError(label() + " is not running" + diagnostics());
        const long id = next_id_++;
        nlohmann::json request = {{"id", id}, {"inputs", std::vector<double>(inputs.begin(), inputs.end())}};
        write_line(request.dump());
        const std::string line = read_line();

        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw ProtocolError(label() + " sent a malformed reply: " + excerpt(line));
        }
        if (!reply.is_object() || !reply.contains("id") || !reply["id"].is_number_integer())
            throw ProtocolError(label() + " reply has no integer id: " + excerpt(line));
        if (reply["id"].get<long>() != id)
            throw ProtocolError(label() + " replied with id " + std::to_string(reply["id"].get<long>()) +
                                " to request " + std::to_string(id));
        if (!reply.contains("output") || !reply["output"].is_number())
            throw ProtocolError(label() + " reply has no numeric output: " + excerpt(line));
        return reply["output"].get<double>();
    }

private:
    static constexpr std::size_t kStderrTail = 4096;

    void spawn() {
        int in_pipe[2], out_pipe[2], err_pipe[2], exec_pipe[2];
        // Close-on-exec everywhere so sibling model processes do not hold each
        // other's pipes open; dup2 clears the flag on the child's stdio.
        if (pipe2(in_pipe, O_CLOEXEC) != 0 || pipe2(out_pipe, O_CLOEXEC) != 0 || pipe2(err_pipe, O_CLOEXEC) != 0 ||
            pipe2(exec_pipe, O_CLOEXEC) != 0)
            throw ModelEvaluationError("cannot create pipes for " + label() + ": " + std::strerror(errno));

        // A child that dies mid-write must surface as an error, not kill us.
        std::signal(SIGPIPE, SIG_IGN);

        std::vector<char*> argv;
        for (auto& a : spec_.command) argv.push_back(a.data());
        argv.push_back(nullptr);

        pid_ = fork();
        if (pid_ < 0) throw ModelEvaluationError("cannot fork " + label() + ": " + std::strerror(errno));
        if (pid_ == 0) {
            dup2(in_pipe[0], STDIN_FILENO);
            dup2(out_pipe[1], STDOUT_FILENO);
            dup2(err_pipe[1], STDERR_FILENO);
            for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) close(fd);
            execvp(argv[0], argv.data());
            const int err = errno;
            (void)!write(exec_pipe[1], &err, sizeof err);
            _exit(127);
        }
        close(in_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[1]);
        close(exec_pipe[1]);
        to_child_ = in_pipe[1];
        from_child_ = out_pipe[0];
        child_err_ = err_pipe[0];
        fcntl(from_child_, F_SETFL, O_NONBLOCK);
        fcntl(child_err_, F_SETFL, O_NONBLOCK);

        int exec_errno = 0;
        const auto got = read(exec_pipe[0], &exec_errno, sizeof exec_errno);
        close(exec_pipe[0]);
        if (got == static_cast<ssize_t>(sizeof exec_errno)) {
            reap(true);
            throw ModelEvaluationError("cannot execute " + label() + ": " + std::strerror(exec_errno));
        }
    }

    void write_line(const std::string& text) {
        std::string data = text + "\n";
        std::size_t done = 0;
        while (done < data.size()) {
            const auto n = write(to_child_, data.data() + done, data.size() - done);
            if (n < 0) {
                if (errno == EINTR) continue;
                fail_dead("stopped accepting input");
            }
            done += static_cast<std::size_t>(n);
        }
    }

    std::string read_line() {
        using clock = std::chrono::steady_clock;
        const auto deadline = clock::now() + std::chrono::duration<double>(spec_.timeout);
        for (;;) {
            if (const auto nl = pending_.find('\n'); nl != std::string::npos) {
                std::string line = pending_.substr(0, nl);
                pending_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
            if (left.count() <= 0) {
                reap(true);
                throw ModelEvaluationError(label() + " timed out after " + format_seconds(spec_.timeout) +
                                           diagnostics());
            }
            pollfd fds[2] = {{from_child_, POLLIN, 0}, {child_err_, POLLIN, 0}};
            const int ready = poll(fds, child_err_ >= 0 ? 2 : 1, static_cast<int>(left.count()));
            if (ready < 0 && errno != EINTR)
                throw ModelEvaluationError(label() + " poll failed: " + std::strerror(errno));
            if (child_err_ >= 0 && (fds[1].revents & (POLLIN | POLLHUP))) drain_stderr();
            if (fds[0].revents & (POLLIN | POLLHUP)) {
                char buf[4096];
                const auto n = read(from_child_, buf, sizeof buf);
                if (n > 0) {
                    pending_.append(buf, static_cast<std::size_t>(n));
                } else if (n == 0) {
                    fail_dead("closed its output");
                } else if (errno != EAGAIN && errno != EINTR) {
                    throw ModelEvaluationError(label() + " read failed: " + std::strerror(errno));
                }
            }
        }
    }

    void drain_stderr() {
        char buf[4096];
        for (;;) {
            const auto n = read(child_err_, buf, sizeof buf);
            if (n > 0) {
                stderr_tail_.append(buf, static_cast<std::size_t>(n));
                if (stderr_tail_.size() > kStderrTail) stderr_tail_.erase(0, stderr_tail_.size() - kStderrTail);
                continue;
            }
            if (n == 0) {
                close(child_err_);
                child_err_ = -1;
            }
            return;
        }
    }

    [[noreturn]] void fail_dead(const std::string& what) {
        if (child_err_ >= 0) drain_stderr();
        const int status = reap(false);
        std::string reason = label() + " " + what;
        if (WIFEXITED(status))
            reason += " (exit code " + std::to_string(WEXITSTATUS(status)) + ")";
        else if (WIFSIGNALED(status))
            reason += " (killed by signal " + std::to_string(WTERMSIG(status)) + ")";
        throw ModelEvaluationError(reason + diagnostics());
    }

    /// Waits for the child (killing it first if asked) and closes all pipes.
    int reap(bool kill_first) {
        int status = 0;
        if (pid_ > 0) {
            if (kill_first) kill(pid_, SIGKILL);
            while (waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
            }
            pid_ = -1;
        }
        for (int* fd : {&to_child_, &from_child_, &child_err_})
            if (*fd >= 0) {
                close(*fd);
                *fd = -1;
            }
        return status;
    }

    void shutdown() noexcept {
        if (pid_ <= 0) return;
        // Closing stdin is the child's cue to exit; give it a moment first.
        close(to_child_);
        to_child_ = -1;
        for (int i = 0; i < 50; ++i) {
            int status = 0;
            if (waitpid(pid_, &status, WNOHANG) == pid_) {
                pid_ = -1;
                break;
            }
            usleep(20000);
        }
        reap(true);
    }

    [[nodiscard]] std::string label() const { return "external model '" + spec_.command.front() + "'"; }

    [[nodiscard]] std::string diagnostics() const {
        if (stderr_tail_.empty()) return "";
        return "; stderr: " + stderr_tail_;
    }

    static std::string excerpt(const std::string& line) {
        return line.size() > 200 ? line.substr(0, 200) + "..." : line;
    }

    static std::string format_seconds(double s) {
        std::string t = std::to_string(s);
        t.erase(t.find_last_not_of('0') + 1);
        if (!t.empty() && t.back() == '.') t.pop_back();
        return t + " s";
    }

    ExternalModelSpec spec_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    int child_err_ = -1;
    long next_id_ = 0;
    std::string pending_;
    std::string stderr_tail_;
};

}  // namespace lfmc
