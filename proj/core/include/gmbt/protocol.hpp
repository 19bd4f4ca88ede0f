#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gmbt/errors.hpp"
#include "gmbt/executor.hpp"

namespace gmbt {

// Executor wire protocol v1: newline-delimited JSON objects over the child
// process's standard input/output, one frame per line, UTF-8, exactly one
// response per request. See docs/protocol.md for the conformance checklist.

inline constexpr std::string_view kProtocolVersion = "1";
inline constexpr int kDefaultStepTimeoutMs = 10000;

struct ResetMsg {
    std::string protocol = std::string(kProtocolVersion);

    bool operator==(const ResetMsg&) const = default;
};

struct StepMsg {
    Phase phase = Phase::Action;
    std::string text;
    int test_index = 0;
    int path_index = 0;

    bool operator==(const StepMsg&) const = default;
};

struct ShutdownMsg {
    bool operator==(const ShutdownMsg&) const = default;
};

using EngineMessage = std::variant<ResetMsg, StepMsg, ShutdownMsg>;

/// A response frame. Fail is only legal in response to a Step; Error is
/// legal anywhere.
struct ExecutorMessage {
    enum class Kind { Ok, Fail, Error };

    Kind kind = Kind::Ok;
    std::string reason;

    static ExecutorMessage ok() { return {Kind::Ok, {}}; }
    static ExecutorMessage fail(std::string reason) { return {Kind::Fail, std::move(reason)}; }
    static ExecutorMessage error(std::string reason) { return {Kind::Error, std::move(reason)}; }

    bool operator==(const ExecutorMessage&) const = default;
};

/// One line, no trailing newline.
std::string encode_engine_message(const EngineMessage& message);
std::string encode_executor_message(const ExecutorMessage& message);

/// Throw ProcessError{MalformedFrame} for anything that is not a single
/// well-formed frame of the right direction.
EngineMessage decode_engine_message(std::string_view line);
ExecutorMessage decode_executor_message(std::string_view line);

StepResult to_step_result(const ExecutorMessage& message);

struct LogEntry {
    EngineMessage request;
    std::optional<ExecutorMessage> response;
};

/// Client for a step executor running as a child process. Requests are
/// strictly serialized; a handle is bound to one engine at a time.
class ExecutorHandle final : public StepExecutor {
public:
    /// Starts the child with pipes on stdin/stdout and performs the
    /// handshake (Reset -> Ok within the timeout). Throws ProcessError with
    /// kind SpawnFailed or HandshakeTimeout; a garbage response surfaces as
    /// MalformedFrame and a dying child as BrokenPipe.
    static ExecutorHandle spawn(const std::vector<std::string>& command,
                                int timeout_ms = kDefaultStepTimeoutMs,
                                bool capture_log = false);

    ExecutorHandle() = default;
    ExecutorHandle(ExecutorHandle&& other) noexcept;
    ExecutorHandle& operator=(ExecutorHandle&& other) noexcept;
    ExecutorHandle(const ExecutorHandle&) = delete;
    ExecutorHandle& operator=(const ExecutorHandle&) = delete;
    ~ExecutorHandle() override;

    StepResult reset() override;
    StepResult step(Phase phase, const std::string& text, int test_index,
                    int path_index) override;

    /// Sends Shutdown, closes the child's input, waits a bounded time and
    /// then kills. Idempotent; returns the exit status (negative signal
    /// number if killed).
    int shutdown();

    bool alive() const { return pid_ > 0; }
    int timeout_ms() const { return timeout_ms_; }
    const std::vector<LogEntry>& log() const { return log_; }

private:
    ExecutorMessage roundtrip(const EngineMessage& request);
    std::string read_line(int deadline_ms);
    void write_line(const std::string& line);
    void kill_child() noexcept;

    int pid_ = -1;
    int channel_fd_ = -1;
    int timeout_ms_ = kDefaultStepTimeoutMs;
    bool capture_log_ = false;
    std::string read_buffer_;
    std::vector<LogEntry> log_;
    std::optional<int> exit_status_;
};

/// spawn + handshake, as a free function.
ExecutorHandle spawn_executor(const std::vector<std::string>& command,
                              int timeout_ms = kDefaultStepTimeoutMs, bool capture_log = false);

/// Splits an executor command string into argv, honoring single and double
/// quotes and backslash escapes.
std::vector<std::string> split_command_line(std::string_view command);

}  // namespace gmbt
