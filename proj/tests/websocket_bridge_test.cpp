#include <gtest/gtest.h>

#include <thread>

#include "rhyme_mimic/bus.hpp"
#include "rhyme_mimic/websocket_bridge.hpp"
#include "ws_client.hpp"

using namespace rhyme_mimic;
using namespace std::chrono_literals;

namespace {

struct Fixture {
    SteadyClock clock;
    MessageBus bus{clock};
    NodeHandle game = bus.connect("game");
    WebsocketBridge bridge{bus, Endpoint{"127.0.0.1", 0}};
};

bool is_topic(const BusMessage& m, std::string_view t) { return m.topic == t; }

}  // namespace

TEST(WebsocketBridge, NewConsoleGetsLatestState) {
    Fixture f;
    f.game.publish(topics::game_state, {{"phase", "Singing"}, {"line", 2}});
    f.game.publish(topics::game_state, {{"phase", "WaitingForImitation"}, {"line", 2}});
    std::this_thread::sleep_for(50ms);  // let the bridge tap catch up
    oracle::WsClient console(f.bridge.port());
    const auto m = console.read(3000ms);
    ASSERT_TRUE(m);
    EXPECT_EQ(m->topic, topics::game_state);
    EXPECT_EQ(m->payload["phase"], "WaitingForImitation");
    EXPECT_EQ(m->node_id, "game");
    EXPECT_EQ(m->seq, 2u);
}

TEST(WebsocketBridge, TwoConsolesSeeTheSameState) {
    Fixture f;
    oracle::WsClient a(f.bridge.port());
    oracle::WsClient b(f.bridge.port());
    ASSERT_TRUE([&] {
        for (int i = 0; i < 200 && f.bridge.connected_consoles() < 2; ++i) std::this_thread::sleep_for(10ms);
        return f.bridge.connected_consoles() == 2;
    }());
    std::this_thread::sleep_for(50ms);
    f.game.publish(topics::game_state, {{"phase", "Encouraging"}, {"line", 4}});
    auto pick = [](const BusMessage& m) { return is_topic(m, topics::game_state); };
    const auto ma = a.read_until(pick, 3000ms);
    const auto mb = b.read_until(pick, 3000ms);
    ASSERT_TRUE(ma && mb);
    EXPECT_EQ(*ma, *mb);
}

TEST(WebsocketBridge, ConsoleCommandsReachTheBus) {
    Fixture f;
    f.game.subscribe(topics::woz_commands);
    oracle::WsClient console(f.bridge.port());
    console.send_woz("RepeatLine", "c-1");
    const auto m = f.game.receive_for(3000ms);
    ASSERT_TRUE(m);
    EXPECT_EQ(m->topic, topics::woz_commands);
    EXPECT_EQ(m->payload["command"], "RepeatLine");
    EXPECT_EQ(m->payload["command_id"], "c-1");
    EXPECT_EQ(m->node_id.rfind("console", 0), 0u);
}

TEST(WebsocketBridge, ConsolesMayOnlyPublishCommands) {
    Fixture f;
    f.game.subscribe(topics::game_state);
    oracle::WsClient console(f.bridge.port());
    console.send({std::string(topics::game_state), 1, 0, "console", {{"phase", "Finished"}}});
    const auto diag = console.read_until([](const BusMessage& m) { return is_topic(m, topics::diagnostics); }, 3000ms);
    ASSERT_TRUE(diag);
    EXPECT_EQ(diag->payload["event"], "rejected");
    EXPECT_FALSE(f.game.receive_for(100ms));
    console.send_text("garbage");
    const auto err = console.read_until([](const BusMessage& m) { return is_topic(m, topics::diagnostics); }, 3000ms);
    ASSERT_TRUE(err);
    EXPECT_EQ(err->payload["event"], "protocol_error");
}

TEST(WebsocketBridge, ForwardsObservedTopics) {
    Fixture f;
    oracle::WsClient console(f.bridge.port());
    for (int i = 0; i < 200 && f.bridge.connected_consoles() < 1; ++i) std::this_thread::sleep_for(10ms);
    std::this_thread::sleep_for(50ms);
    f.game.publish(topics::game_events, {{"n", 1}});
    f.game.publish(topics::peripheral_display, {{"n", 2}});  // not observed
    f.game.publish(topics::pose_classified, {{"n", 3}});
    const auto a = console.read(3000ms);
    const auto b = console.read(3000ms);
    ASSERT_TRUE(a && b);
    EXPECT_EQ(a->topic, topics::game_events);
    EXPECT_EQ(b->topic, topics::pose_classified);
}
