#include <gtest/gtest.h>

#include <algorithm>
#include <thread>

#include "rhyme_mimic/bus.hpp"
#include "rhyme_mimic/tcp_transport.hpp"

using namespace rhyme_mimic;
using namespace std::chrono_literals;

namespace {

template <typename Pred>
bool eventually(Pred pred, std::chrono::milliseconds limit = 3000ms) {
    const auto end = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < end) {
        if (pred()) return true;
        std::this_thread::sleep_for(5ms);
    }
    return pred();
}

struct Fixture {
    SteadyClock clock;
    MessageBus bus{clock};
    TcpBusServer server{bus, Endpoint{"127.0.0.1", 0}};
    Endpoint at() const { return {"127.0.0.1", server.port()}; }
};

}  // namespace

TEST(Endpoint, Parse) {
    const auto e = Endpoint::parse("127.0.0.1:7001");
    EXPECT_EQ(e.host, "127.0.0.1");
    EXPECT_EQ(e.port, 7001);
    EXPECT_EQ(e.to_string(), "127.0.0.1:7001");
    for (const char* bad : {"nohost", "h:", ":1", "h:99999", "h:x"}) EXPECT_THROW(Endpoint::parse(bad), std::invalid_argument) << bad;
}

TEST(Tcp, RemoteToLocalPayloadIsIdentical) {
    Fixture f;
    auto local = f.bus.connect("local");
    local.subscribe("game/state");
    auto remote = RemoteNode::connect(f.at(), "robot");
    EXPECT_EQ(remote.id().rfind("robot#", 0), 0u);
    const nlohmann::json payload = {{"phase", "Singing"}, {"line", 3}, {"nested", {{"a", {1.5, -2, "x"}}}}};
    remote.publish("game/state", payload);
    const auto m = local.receive_for(3000ms);
    ASSERT_TRUE(m);
    EXPECT_EQ(m->payload.dump(), payload.dump());
    EXPECT_EQ(m->node_id, remote.id());
}

TEST(Tcp, LocalToRemoteInOrder) {
    Fixture f;
    auto remote = RemoteNode::connect(f.at(), "viewer");
    remote.subscribe("game/events");
    auto local = f.bus.connect("local");
    // Subscription travels asynchronously; wait until the server has applied it.
    ASSERT_TRUE(eventually([&] {
        local.publish("game/events", -1);
        return remote.receive_for(20ms).has_value();
    }));
    while (remote.receive_for(50ms)) {
    }
    for (int i = 0; i < 100; ++i) local.publish("game/events", i);
    for (int i = 0; i < 100; ++i) {
        const auto m = remote.receive_for(3000ms);
        ASSERT_TRUE(m) << i;
        EXPECT_EQ(m->payload, i);
    }
}

TEST(Tcp, MalformedLineClosesOnlyThatConnection) {
    Fixture f;
    auto diag = f.bus.connect("diag");
    diag.subscribe(topics::diagnostics);
    auto good = RemoteNode::connect(f.at(), "good");
    auto bad = RemoteNode::connect(f.at(), "bad");
    ASSERT_TRUE(eventually([&] { return f.server.connected_clients() == 2; }));
    bad.send_raw("this is not an envelope");
    ASSERT_TRUE(eventually([&] { return f.server.connected_clients() == 1; }));
    EXPECT_EQ(f.server.protocol_errors(), 1u);
    const auto left = diag.receive_for(3000ms);
    ASSERT_TRUE(left);
    EXPECT_EQ(left->payload["event"], "node_left");
    EXPECT_EQ(left->payload["node_id"], bad.id());
    auto local = f.bus.connect("local");
    local.subscribe("game/state");
    good.publish("game/state", 1);
    EXPECT_TRUE(local.receive_for(3000ms));
}

TEST(Tcp, DisconnectUnsubscribesAndReconnectGetsFreshId) {
    Fixture f;
    auto diag = f.bus.connect("diag");
    diag.subscribe(topics::diagnostics);
    std::string first;
    {
        auto r = RemoteNode::connect(f.at(), "cam");
        first = r.id();
        r.subscribe("game/state");
        ASSERT_TRUE(eventually([&] {
            const auto ids = f.bus.nodes();
            return std::find(ids.begin(), ids.end(), first) != ids.end();
        }));
        r.close();
    }
    ASSERT_TRUE(eventually([&] { return f.server.connected_clients() == 0; }));
    const auto left = diag.receive_for(3000ms);
    ASSERT_TRUE(left);
    EXPECT_EQ(left->payload["node_id"], first);
    for (const auto& id : f.bus.nodes()) EXPECT_NE(id, first);
    auto again = RemoteNode::connect(f.at(), "cam");
    EXPECT_NE(again.id(), first);
}

TEST(Tcp, ConnectRefused) {
    std::uint16_t port = 0;
    {
        Fixture f;
        port = f.server.port();
        f.server.stop();
    }
    try {
        RemoteNode::connect({"127.0.0.1", port}, "x", 500ms);
        FAIL();
    } catch (const BusError& e) {
        EXPECT_EQ(e.kind(), BusError::Kind::connect_refused);
    }
}
