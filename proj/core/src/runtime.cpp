#include "rhyme_mimic/runtime.hpp"

namespace rhyme_mimic {

class GameRuntime::AbortNode final : public Node {
public:
    AbortNode(std::atomic<bool>& flag, GameNode& game, EventLoop& loop) : flag_(flag), game_(game), loop_(loop) {}

    std::string_view name() const override { return "abort"; }
    std::size_t poll() override {
        if (!flag_.exchange(false)) return 0;
        if (!game_.finished()) game_.inject(GameEvent::woz_command(WozCommand::abort, loop_.now_ms()));
        return 1;
    }

private:
    std::atomic<bool>& flag_;
    GameNode& game_;
    EventLoop& loop_;
};

std::set<std::string> script_resources(const RhymeScript& script) {
    std::set<std::string> refs;
    for (const RhymeLine& line : script.lines) {
        for (const std::string* ref : {&line.audio_ref, &line.image_ref, &line.gesture_ref}) {
            if (!ref->empty()) refs.insert(*ref);
        }
    }
    return refs;
}

GameRuntime::GameRuntime(GmmClassifier classifier, RhymeScript script, std::vector<StreamFrame> frames,
                         RuntimeOptions options)
    : loop_(options.clock),
      bus_(std::make_unique<MessageBus>(loop_.clock())),
      classifier_(std::make_unique<GmmClassifier>(std::move(classifier))) {
    bus_->set_notifier([this] { loop_.wake(); });

    const std::set<std::string> resources = options.resources ? *options.resources : script_resources(script);

    pose_ = std::make_unique<PoseNode>(*bus_, *classifier_, options.threshold);
    for (PeripheralKind kind : {PeripheralKind::display, PeripheralKind::audio, PeripheralKind::tts, PeripheralKind::motion}) {
        peripherals_[static_cast<std::size_t>(kind)] =
            std::make_unique<PeripheralNode>(kind, *bus_, loop_, options.latency, resources);
    }
    replay_ = std::make_unique<ReplayNode>(std::move(frames), options.replay, *bus_, loop_);
    game_ = std::make_unique<GameNode>(*bus_, loop_, std::move(script), options.game);
    abort_node_ = std::make_unique<AbortNode>(abort_requested_, *game_, loop_);

    loop_.add_node(*abort_node_);
    loop_.add_node(*pose_);
    loop_.add_node(*game_);
    for (auto& p : peripherals_) loop_.add_node(*p);
    loop_.add_node(*replay_);

    if (options.bus_endpoint) tcp_ = std::make_unique<TcpBusServer>(*bus_, *options.bus_endpoint);
    if (options.ws_endpoint) bridge_ = std::make_unique<WebsocketBridge>(*bus_, *options.ws_endpoint, options.bridge);
}

GameRuntime::~GameRuntime() {
    if (bridge_) bridge_->stop();
    if (tcp_) tcp_->stop();
    bus_->set_notifier({});
}

void GameRuntime::start() {
    game_->start();
    replay_->start();
}

EventLoop::RunStatus GameRuntime::run_until_finished(std::optional<std::int64_t> deadline_ms) {
    return loop_.run_until([this] { return game_->finished(); }, deadline_ms);
}

}  // namespace rhyme_mimic
