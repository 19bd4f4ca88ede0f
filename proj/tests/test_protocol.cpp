#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <chrono>
#include <string>
#include <variant>
#include <vector>

#include "doctest.h"
#include "generators.hpp"
#include "gmbt/errors.hpp"
#include "gmbt/protocol.hpp"
#include "gmbt/random.hpp"

using namespace gmbt;

namespace {

std::string sim_command_spec(const char* name) {
    return std::string(GMBT_FIXTURE_DIR) + "/sim/" + name;
}

std::vector<std::string> sim_command(const char* name) {
    return {GMBT_SIM_BIN, "--spec", sim_command_spec(name)};
}

ProcessError::Kind decode_engine_error(const std::string& line) {
    try {
        decode_engine_message(line);
    } catch (const ProcessError& e) {
        return e.kind();
    }
    FAIL("expected a ProcessError for: ", line);
    return ProcessError::Kind::MalformedFrame;
}

}  // namespace

TEST_CASE("frames encode to stable JSON lines") {
    CHECK(encode_engine_message(ResetMsg{}) == R"({"protocol":"1","type":"reset"})");

    StepMsg step;
    step.phase = Phase::Action;
    step.text = "I push an element onto the stack";
    step.test_index = 3;
    step.path_index = 7;
    CHECK(encode_engine_message(step) ==
          R"({"index":7,"phase":"action","test":3,"text":"I push an element onto the stack","type":"step"})");

    CHECK(encode_engine_message(ShutdownMsg{}) == R"({"type":"shutdown"})");
    CHECK(encode_executor_message(ExecutorMessage::ok()) == R"({"type":"ok"})");
    CHECK(encode_executor_message(ExecutorMessage::fail("too small")) ==
          R"({"reason":"too small","type":"fail"})");
    CHECK(encode_executor_message(ExecutorMessage::error("boom")) ==
          R"({"reason":"boom","type":"error"})");
}

TEST_CASE("key order on the wire is insignificant") {
    auto msg = decode_engine_message(
        R"({"type":"step","text":"go","phase":"precondition","index":1,"test":2})");
    const StepMsg& step = std::get<StepMsg>(msg);
    CHECK(step.phase == Phase::Precondition);
    CHECK(step.text == "go");
    CHECK(step.test_index == 2);
    CHECK(step.path_index == 1);

    // Unknown extra keys are ignored.
    auto reset = decode_engine_message(R"({"protocol":"1","type":"reset","extra":true})");
    CHECK(std::get<ResetMsg>(reset).protocol == "1");
}

TEST_CASE("codec round-trips over a thousand random frames") {
    SplitMix64 rng(2026);
    for (int i = 0; i < 600; ++i) {
        EngineMessage message = gmbt_test::random_engine_message(rng);
        CHECK(decode_engine_message(encode_engine_message(message)) == message);
    }
    for (int i = 0; i < 600; ++i) {
        ExecutorMessage message = gmbt_test::random_executor_message(rng);
        CHECK(decode_executor_message(encode_executor_message(message)) == message);
    }
}

TEST_CASE("malformed frames are rejected with context") {
    CHECK(decode_engine_error("not json at all") == ProcessError::Kind::MalformedFrame);
    CHECK(decode_engine_error("[1,2]") == ProcessError::Kind::MalformedFrame);
    CHECK(decode_engine_error(R"({"no":"type"})") == ProcessError::Kind::MalformedFrame);
    CHECK(decode_engine_error(R"({"type":"warp"})") == ProcessError::Kind::MalformedFrame);
    CHECK(decode_engine_error(R"({"type":"reset"})") == ProcessError::Kind::MalformedFrame);
    CHECK(decode_engine_error(R"({"type":"step","phase":"action"})") ==
          ProcessError::Kind::MalformedFrame);
    CHECK(decode_engine_error(
              R"({"type":"step","phase":"sideways","text":"x","test":0,"index":0})") ==
          ProcessError::Kind::MalformedFrame);
    CHECK(decode_engine_error(
              R"({"type":"step","phase":"action","text":"x","test":"0","index":0})") ==
          ProcessError::Kind::MalformedFrame);

    CHECK_THROWS_WITH_AS(decode_executor_message("{}"),
                         "frame has no string 'type': {}", ProcessError);
    CHECK_THROWS_WITH_AS(decode_executor_message(R"({"type":"okay"})"),
                         R"(unknown executor frame type 'okay': {"type":"okay"})",
                         ProcessError);

    // A fail frame without a reason decodes with an empty one.
    CHECK(decode_executor_message(R"({"type":"fail"})") == ExecutorMessage::fail(""));
}

TEST_CASE("to_step_result maps the three kinds") {
    CHECK(to_step_result(ExecutorMessage::ok()) == StepResult::ok());
    CHECK(to_step_result(ExecutorMessage::fail("f")) == StepResult::fail("f"));
    CHECK(to_step_result(ExecutorMessage::error("e")) == StepResult::error("e"));
}

TEST_CASE("split_command_line") {
    using V = std::vector<std::string>;
    CHECK(split_command_line("sim --spec stack.json") == V{"sim", "--spec", "stack.json"});
    CHECK(split_command_line("  spaced   out  ") == V{"spaced", "out"});
    CHECK(split_command_line("run \"a b\" c") == V{"run", "a b", "c"});
    CHECK(split_command_line("run 'a b'") == V{"run", "a b"});
    CHECK(split_command_line("run a\\ b") == V{"run", "a b"});
    CHECK(split_command_line("run \"a\\\"b\"") == V{"run", "a\"b"});
    CHECK(split_command_line("run ''") == V{"run", ""});
    CHECK(split_command_line("run 'no \\ escape'") == V{"run", "no \\ escape"});
    CHECK(split_command_line("").empty());
    CHECK_THROWS_AS(split_command_line("run 'oops"), std::invalid_argument);
    CHECK_THROWS_AS(split_command_line("run oops\\"), std::invalid_argument);
}

TEST_CASE("spawn runs the simulator end to end") {
    ExecutorHandle handle = ExecutorHandle::spawn(sim_command("stack.json"));
    REQUIRE(handle.alive());
    CHECK(handle.timeout_ms() == kDefaultStepTimeoutMs);

    // At size zero the pop guard fails and a push succeeds.
    CHECK(handle.step(Phase::Precondition, "the stack is not empty", 0, 0) ==
          StepResult::fail("size is 0, wanted > 0"));
    CHECK(handle.step(Phase::Action, "I push an element onto the stack", 0, 0).is_ok());
    CHECK(handle.step(Phase::Precondition, "the stack is not empty", 0, 1).is_ok());
    CHECK(handle.step(Phase::Postcondition, "the size should be 1", 0, 1).is_ok());
    CHECK(handle.step(Phase::Postcondition, "the size should be 5", 0, 1) ==
          StepResult::fail("size is 1, wanted == 5"));
    CHECK(handle.step(Phase::Action, "I warp somewhere", 0, 2) ==
          StepResult::fail("no matching rule"));

    // A reset rewinds the simulator state.
    CHECK(handle.reset().is_ok());
    CHECK(handle.step(Phase::Postcondition, "the size should be 0", 1, 0).is_ok());

    int status = handle.shutdown();
    CHECK(status == 0);
    CHECK(!handle.alive());
    CHECK(handle.shutdown() == status);  // idempotent
}

TEST_CASE("spawn with log capture records request and response frames") {
    ExecutorHandle handle =
        ExecutorHandle::spawn(sim_command("stack.json"), kDefaultStepTimeoutMs, true);
    handle.step(Phase::Action, "I push an element onto the stack", 0, 0);
    handle.shutdown();

    // Handshake reset, one step, shutdown.
    REQUIRE(handle.log().size() == 3);
    CHECK(std::holds_alternative<ResetMsg>(handle.log()[0].request));
    REQUIRE(handle.log()[0].response.has_value());
    CHECK(handle.log()[0].response->kind == ExecutorMessage::Kind::Ok);
    const auto* step = std::get_if<StepMsg>(&handle.log()[1].request);
    REQUIRE(step != nullptr);
    CHECK(step->text == "I push an element onto the stack");
    CHECK(std::holds_alternative<ShutdownMsg>(handle.log()[2].request));
}

TEST_CASE("spawn failures carry the failing command") {
    try {
        ExecutorHandle::spawn({"/no/such/binary"});
        FAIL("expected SpawnFailed");
    } catch (const ProcessError& e) {
        CHECK(e.kind() == ProcessError::Kind::SpawnFailed);
        CHECK(std::string(e.what()).find("cannot execute '/no/such/binary'") !=
              std::string::npos);
    }
    CHECK_THROWS_AS(ExecutorHandle::spawn({}), ProcessError);
}

TEST_CASE("handshake failures are classified") {
    SUBCASE("child exits without answering") {
        try {
            ExecutorHandle::spawn({"true"});
            FAIL("expected BrokenPipe");
        } catch (const ProcessError& e) {
            CHECK(e.kind() == ProcessError::Kind::BrokenPipe);
        }
    }
    SUBCASE("garbage answer") {
        // Consume the reset before answering, otherwise the child may exit
        // before the handshake write and race into BrokenPipe instead.
        try {
            ExecutorHandle::spawn({"sh", "-c", "read line; echo not-a-frame"});
            FAIL("expected MalformedFrame");
        } catch (const ProcessError& e) {
            CHECK(e.kind() == ProcessError::Kind::MalformedFrame);
        }
    }
    SUBCASE("fail answer") {
        try {
            ExecutorHandle::spawn({"sh", "-c", R"(echo '{"type":"fail"}'; sleep 1)"});
            FAIL("expected MalformedFrame");
        } catch (const ProcessError& e) {
            CHECK(e.kind() == ProcessError::Kind::MalformedFrame);
            CHECK(std::string(e.what()).find("'fail' response to the handshake reset") !=
                  std::string::npos);
        }
    }
    SUBCASE("error answer") {
        try {
            ExecutorHandle::spawn(
                {"sh", "-c", R"(echo '{"type":"error","reason":"no device"}'; sleep 1)"});
            FAIL("expected SpawnFailed");
        } catch (const ProcessError& e) {
            CHECK(e.kind() == ProcessError::Kind::SpawnFailed);
            CHECK(std::string(e.what()).find("no device") != std::string::npos);
        }
    }
    SUBCASE("no answer in time") {
        try {
            ExecutorHandle::spawn({"sleep", "5"}, 300);
            FAIL("expected HandshakeTimeout");
        } catch (const ProcessError& e) {
            CHECK(e.kind() == ProcessError::Kind::HandshakeTimeout);
        }
    }
}

TEST_CASE("a stalled executor times out within the deadline") {
    std::vector<std::string> command = sim_command("stack.json");
    command.push_back("--stall-after");
    command.push_back("1");  // answer the handshake, then go quiet

    ExecutorHandle handle = ExecutorHandle::spawn(command, 400);
    auto begin = std::chrono::steady_clock::now();
    try {
        handle.step(Phase::Action, "I push an element onto the stack", 0, 0);
        FAIL("expected Timeout");
    } catch (const ProcessError& e) {
        CHECK(e.kind() == ProcessError::Kind::Timeout);
        CHECK(std::string(e.what()).find("no response within 400 ms") != std::string::npos);
    }
    double elapsed = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - begin).count();
    CHECK(elapsed < 5.0);  // deadline plus kill overhead, not the full sleep
    // The child was killed; shutdown reports the signal.
    CHECK(handle.shutdown() < 0);
}

TEST_CASE("spawn_executor free function matches the member") {
    ExecutorHandle handle = spawn_executor(sim_command("ehealth.json"));
    CHECK(handle.step(Phase::Precondition, "I have pending lab results", 0, 0).is_ok());
    CHECK(handle.shutdown() == 0);
}
