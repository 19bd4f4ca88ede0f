#include "gmbt/protocol.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace gmbt {

namespace {

using nlohmann::json;

[[noreturn]] void malformed(const std::string& what, std::string_view line) {
    std::string snippet(line.substr(0, 200));
    throw ProcessError(ProcessError::Kind::MalformedFrame, what + ": " + snippet);
}

json parse_frame(std::string_view line) {
    json frame = json::parse(line, nullptr, false);
    if (frame.is_discarded() || !frame.is_object()) {
        malformed("frame is not a JSON object", line);
    }
    return frame;
}

std::string frame_type(const json& frame, std::string_view line) {
    auto it = frame.find("type");
    if (it == frame.end() || !it->is_string()) malformed("frame has no string 'type'", line);
    return it->get<std::string>();
}

Phase parse_phase(const json& frame, std::string_view line) {
    auto it = frame.find("phase");
    if (it == frame.end() || !it->is_string()) malformed("step frame has no 'phase'", line);
    const std::string& phase = it->get_ref<const std::string&>();
    if (phase == "precondition") return Phase::Precondition;
    if (phase == "action") return Phase::Action;
    if (phase == "postcondition") return Phase::Postcondition;
    malformed("unknown step phase '" + phase + "'", line);
}

int parse_int_field(const json& frame, const char* key, std::string_view line) {
    auto it = frame.find(key);
    if (it == frame.end() || !it->is_number_integer()) {
        malformed(std::string("step frame has no integer '") + key + "'", line);
    }
    return it->get<int>();
}

std::string parse_reason(const json& frame) {
    auto it = frame.find("reason");
    if (it != frame.end() && it->is_string()) return it->get<std::string>();
    return {};
}

}  // namespace

std::string encode_engine_message(const EngineMessage& message) {
    json frame;
    if (const auto* reset = std::get_if<ResetMsg>(&message)) {
        frame["type"] = "reset";
        frame["protocol"] = reset->protocol;
    } else if (const auto* step = std::get_if<StepMsg>(&message)) {
        frame["type"] = "step";
        frame["phase"] = std::string(to_string(step->phase));
        frame["text"] = step->text;
        frame["test"] = step->test_index;
        frame["index"] = step->path_index;
    } else {
        frame["type"] = "shutdown";
    }
    return frame.dump();
}

std::string encode_executor_message(const ExecutorMessage& message) {
    json frame;
    switch (message.kind) {
        case ExecutorMessage::Kind::Ok:
            frame["type"] = "ok";
            break;
        case ExecutorMessage::Kind::Fail:
            frame["type"] = "fail";
            frame["reason"] = message.reason;
            break;
        case ExecutorMessage::Kind::Error:
            frame["type"] = "error";
            frame["reason"] = message.reason;
            break;
    }
    return frame.dump();
}

EngineMessage decode_engine_message(std::string_view line) {
    json frame = parse_frame(line);
    std::string type = frame_type(frame, line);
    if (type == "reset") {
        auto it = frame.find("protocol");
        if (it == frame.end() || !it->is_string()) {
            malformed("reset frame has no string 'protocol'", line);
        }
        ResetMsg msg;
        msg.protocol = it->get<std::string>();
        return msg;
    }
    if (type == "step") {
        StepMsg msg;
        msg.phase = parse_phase(frame, line);
        auto it = frame.find("text");
        if (it == frame.end() || !it->is_string()) malformed("step frame has no 'text'", line);
        msg.text = it->get<std::string>();
        msg.test_index = parse_int_field(frame, "test", line);
        msg.path_index = parse_int_field(frame, "index", line);
        return msg;
    }
    if (type == "shutdown") return ShutdownMsg{};
    malformed("unknown engine frame type '" + type + "'", line);
}

ExecutorMessage decode_executor_message(std::string_view line) {
    json frame = parse_frame(line);
    std::string type = frame_type(frame, line);
    if (type == "ok") return ExecutorMessage::ok();
    if (type == "fail") return ExecutorMessage::fail(parse_reason(frame));
    if (type == "error") return ExecutorMessage::error(parse_reason(frame));
    malformed("unknown executor frame type '" + type + "'", line);
}

StepResult to_step_result(const ExecutorMessage& message) {
    switch (message.kind) {
        case ExecutorMessage::Kind::Ok: return StepResult::ok();
        case ExecutorMessage::Kind::Fail: return StepResult::fail(message.reason);
        case ExecutorMessage::Kind::Error: return StepResult::error(message.reason);
    }
    return StepResult::error("unreachable");
}

namespace {

[[noreturn]] void throw_errno(ProcessError::Kind kind, const std::string& what) {
    throw ProcessError(kind, what + ": " + std::strerror(errno));
}

}  // namespace

ExecutorHandle ExecutorHandle::spawn(const std::vector<std::string>& command, int timeout_ms,
                                     bool capture_log) {
    if (command.empty()) {
        throw ProcessError(ProcessError::Kind::SpawnFailed, "empty executor command");
    }

    int channel[2];
    if (socketpair(AF_UNIX, SOCK_STREAM, 0, channel) != 0) {
        throw_errno(ProcessError::Kind::SpawnFailed, "socketpair");
    }
    // The exec-error pipe is close-on-exec: EOF without payload means the
    // exec call succeeded, a payload is the child's errno.
    int exec_err[2];
    if (pipe2(exec_err, O_CLOEXEC) != 0) {
        int saved = errno;
        close(channel[0]);
        close(channel[1]);
        errno = saved;
        throw_errno(ProcessError::Kind::SpawnFailed, "pipe2");
    }

    pid_t pid = fork();
    if (pid < 0) {
        int saved = errno;
        close(channel[0]);
        close(channel[1]);
        close(exec_err[0]);
        close(exec_err[1]);
        errno = saved;
        throw_errno(ProcessError::Kind::SpawnFailed, "fork");
    }

    if (pid == 0) {
        close(channel[0]);
        close(exec_err[0]);
        dup2(channel[1], STDIN_FILENO);
        dup2(channel[1], STDOUT_FILENO);
        close(channel[1]);

        std::vector<char*> argv;
        argv.reserve(command.size() + 1);
        for (const std::string& arg : command) {
            argv.push_back(const_cast<char*>(arg.c_str()));
        }
        argv.push_back(nullptr);
        execvp(argv[0], argv.data());

        int err = errno;
        ssize_t ignored = write(exec_err[1], &err, sizeof(err));
        (void)ignored;
        _exit(127);
    }

    close(channel[1]);
    close(exec_err[1]);

    int child_errno = 0;
    ssize_t got = 0;
    do {
        got = read(exec_err[0], &child_errno, sizeof(child_errno));
    } while (got < 0 && errno == EINTR);
    close(exec_err[0]);
    if (got > 0) {
        close(channel[0]);
        int status = 0;
        waitpid(pid, &status, 0);
        throw ProcessError(ProcessError::Kind::SpawnFailed, "cannot execute '" + command[0] +
                                                                "': " + std::strerror(child_errno));
    }

    ExecutorHandle handle;
    handle.pid_ = pid;
    handle.channel_fd_ = channel[0];
    handle.timeout_ms_ = timeout_ms;
    handle.capture_log_ = capture_log;

    try {
        ExecutorMessage response = handle.roundtrip(ResetMsg{});
        switch (response.kind) {
            case ExecutorMessage::Kind::Ok:
                break;
            case ExecutorMessage::Kind::Fail:
                throw ProcessError(ProcessError::Kind::MalformedFrame,
                                   "'fail' response to the handshake reset");
            case ExecutorMessage::Kind::Error:
                throw ProcessError(ProcessError::Kind::SpawnFailed,
                                   "executor reported an error during handshake: " +
                                       response.reason);
        }
    } catch (const ProcessError& error) {
        handle.kill_child();
        if (error.kind() == ProcessError::Kind::Timeout) {
            throw ProcessError(ProcessError::Kind::HandshakeTimeout,
                               "no handshake response within " + std::to_string(timeout_ms) +
                                   " ms");
        }
        throw;
    }
    return handle;
}

ExecutorHandle::ExecutorHandle(ExecutorHandle&& other) noexcept
    : pid_(std::exchange(other.pid_, -1)),
      channel_fd_(std::exchange(other.channel_fd_, -1)),
      timeout_ms_(other.timeout_ms_),
      capture_log_(other.capture_log_),
      read_buffer_(std::move(other.read_buffer_)),
      log_(std::move(other.log_)),
      exit_status_(other.exit_status_) {}

ExecutorHandle& ExecutorHandle::operator=(ExecutorHandle&& other) noexcept {
    if (this != &other) {
        try {
            shutdown();
        } catch (...) {
        }
        pid_ = std::exchange(other.pid_, -1);
        channel_fd_ = std::exchange(other.channel_fd_, -1);
        timeout_ms_ = other.timeout_ms_;
        capture_log_ = other.capture_log_;
        read_buffer_ = std::move(other.read_buffer_);
        log_ = std::move(other.log_);
        exit_status_ = other.exit_status_;
    }
    return *this;
}

ExecutorHandle::~ExecutorHandle() {
    try {
        shutdown();
    } catch (...) {
    }
}

StepResult ExecutorHandle::reset() {
    ExecutorMessage response = roundtrip(ResetMsg{});
    if (response.kind == ExecutorMessage::Kind::Fail) {
        throw ProcessError(ProcessError::Kind::MalformedFrame,
                           "'fail' response to a reset frame");
    }
    return to_step_result(response);
}

StepResult ExecutorHandle::step(Phase phase, const std::string& text, int test_index,
                                int path_index) {
    StepMsg msg;
    msg.phase = phase;
    msg.text = text;
    msg.test_index = test_index;
    msg.path_index = path_index;
    return to_step_result(roundtrip(msg));
}

int ExecutorHandle::shutdown() {
    if (pid_ <= 0) return exit_status_.value_or(-1);

    try {
        write_line(encode_engine_message(ShutdownMsg{}));
        if (capture_log_) log_.push_back({ShutdownMsg{}, std::nullopt});
        std::string line = read_line(timeout_ms_);
        ExecutorMessage response = decode_executor_message(line);
        if (capture_log_) log_.back().response = response;
    } catch (const ProcessError&) {
        // The child may have exited without answering; reap it below.
    }
    if (channel_fd_ >= 0) ::shutdown(channel_fd_, SHUT_WR);

    int status = 0;
    bool reaped = false;
    bool gone = false;
    for (int waited_ms = 0; waited_ms < 2000; waited_ms += 10) {
        pid_t done = waitpid(pid_, &status, WNOHANG);
        if (done == pid_) {
            reaped = true;
            break;
        }
        if (done < 0 && errno == ECHILD) {
            gone = true;
            break;
        }
        poll(nullptr, 0, 10);
    }
    if (!reaped && !gone) {
        kill(pid_, SIGKILL);
        reaped = waitpid(pid_, &status, 0) == pid_;
    }

    if (channel_fd_ >= 0) {
        close(channel_fd_);
        channel_fd_ = -1;
    }
    pid_ = -1;
    if (reaped) {
        exit_status_ = WIFSIGNALED(status) ? -WTERMSIG(status) : WEXITSTATUS(status);
    } else if (!exit_status_) {
        exit_status_ = -1;
    }
    return *exit_status_;
}

void ExecutorHandle::kill_child() noexcept {
    if (pid_ > 0) {
        kill(pid_, SIGKILL);
        int status = 0;
        if (waitpid(pid_, &status, 0) == pid_) {
            exit_status_ = WIFSIGNALED(status) ? -WTERMSIG(status) : WEXITSTATUS(status);
        }
        pid_ = -1;
    }
    if (channel_fd_ >= 0) {
        close(channel_fd_);
        channel_fd_ = -1;
    }
}

ExecutorMessage ExecutorHandle::roundtrip(const EngineMessage& request) {
    if (pid_ <= 0) {
        throw ProcessError(ProcessError::Kind::BrokenPipe, "executor is not running");
    }
    if (capture_log_) log_.push_back({request, std::nullopt});

    write_line(encode_engine_message(request));
    std::string line = read_line(timeout_ms_);
    ExecutorMessage response = decode_executor_message(line);

    if (capture_log_) log_.back().response = response;
    return response;
}

void ExecutorHandle::write_line(const std::string& line) {
    std::string data = line + "\n";
    std::size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = send(channel_fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            int saved = errno;
            kill_child();
            throw ProcessError(ProcessError::Kind::BrokenPipe,
                               std::string("cannot write to executor: ") +
                                   std::strerror(saved));
        }
        sent += static_cast<std::size_t>(n);
    }
}

std::string ExecutorHandle::read_line(int deadline_ms) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(deadline_ms);
    while (true) {
        auto newline = read_buffer_.find('\n');
        if (newline != std::string::npos) {
            std::string line = read_buffer_.substr(0, newline);
            read_buffer_.erase(0, newline + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }

        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                             deadline - std::chrono::steady_clock::now())
                             .count();
        if (remaining <= 0) {
            kill_child();
            throw ProcessError(ProcessError::Kind::Timeout,
                               "no response within " + std::to_string(deadline_ms) + " ms");
        }

        pollfd probe{channel_fd_, POLLIN, 0};
        int ready = poll(&probe, 1, static_cast<int>(remaining));
        if (ready < 0) {
            if (errno == EINTR) continue;
            int saved = errno;
            kill_child();
            throw ProcessError(ProcessError::Kind::BrokenPipe,
                               std::string("poll on executor: ") + std::strerror(saved));
        }
        if (ready == 0) continue;  // re-check the deadline

        char chunk[4096];
        ssize_t n = recv(channel_fd_, chunk, sizeof(chunk), 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            int saved = errno;
            kill_child();
            throw ProcessError(ProcessError::Kind::BrokenPipe,
                               std::string("cannot read from executor: ") +
                                   std::strerror(saved));
        }
        if (n == 0) {
            kill_child();
            throw ProcessError(ProcessError::Kind::BrokenPipe,
                               "executor closed the connection");
        }
        read_buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

ExecutorHandle spawn_executor(const std::vector<std::string>& command, int timeout_ms,
                              bool capture_log) {
    return ExecutorHandle::spawn(command, timeout_ms, capture_log);
}

std::vector<std::string> split_command_line(std::string_view command) {
    std::vector<std::string> argv;
    std::string current;
    bool in_token = false;
    char quote = '\0';

    for (std::size_t i = 0; i < command.size(); ++i) {
        char c = command[i];
        if (quote == '\'') {
            if (c == '\'') {
                quote = '\0';
            } else {
                current.push_back(c);
            }
            continue;
        }
        if (c == '\\' && quote != '\'') {
            if (i + 1 >= command.size()) {
                throw std::invalid_argument("trailing backslash in command line");
            }
            current.push_back(command[++i]);
            in_token = true;
            continue;
        }
        if (quote == '"') {
            if (c == '"') {
                quote = '\0';
            } else {
                current.push_back(c);
            }
            continue;
        }
        if (c == '\'' || c == '"') {
            quote = c;
            in_token = true;
            continue;
        }
        if (c == ' ' || c == '\t') {
            if (in_token) {
                argv.push_back(std::move(current));
                current.clear();
                in_token = false;
            }
            continue;
        }
        current.push_back(c);
        in_token = true;
    }
    if (quote != '\0') {
        throw std::invalid_argument("unterminated quote in command line");
    }
    if (in_token) argv.push_back(std::move(current));
    return argv;
}

}  // namespace gmbt
