#include "dribble/server.hpp"

#include <chrono>
#include <condition_variable>
#include <future>
#include <csignal>
#include <deque>
#include <map>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "dribble/common.hpp"

namespace dribble {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using protocol::Json;
using protocol::Scenario;

// ---- SimSession -------------------------------------------------------------------------------

SimSession::SimSession(const EnvConfig& env_cfg, Controller& controller, std::uint64_t seed, Scenario scenario)
    : env_cfg_(evaluation_env_config(env_cfg)),
      controller_(controller),
      seed_(seed),
      env_(env_cfg_, derive_key(seed, StreamKind::kEval), 0),
      scenario_(scenario) {
  env_.set_stage(env_cfg_.stage2);
  reset(scenario);
}

void SimSession::reset(Scenario scenario) {
  scenario_ = scenario;
  monitor_.reset();
  WorldState start;
  switch (scenario) {
    case Scenario::kOpenField:
      start = scenario_world({-0.35, 0.0}, 0.0, {0.0, 0.0});
      break;
    case Scenario::kDribbleToTarget:
    case Scenario::kObstacleAvoidance: {
      const TaskSpec spec =
          scenario == Scenario::kDribbleToTarget ? TaskSpec::dribble_to_target() : TaskSpec::obstacle_avoidance();
      start = scenario_world(spec.robot_start, spec.robot_yaw, spec.ball_start);
      monitor_.emplace(spec, env_cfg_.physics.body_radius);
      break;
    }
  }
  env_.reset_scenario(start, Command{command_}, ScenarioOptions{false, false, false});
  controller_.reset();
  t0_ = env_.world().t;
  last_reward_ = RewardBreakdown{};
  paused_ = false;
  ++resets_;
}

Vec2 SimSession::set_command(Vec2 v) {
  const double cap = env_cfg_.command.v_cmd_max;
  const double n = norm(v);
  if (n > cap) v = v * (cap / n);
  command_ = v;
  env_.set_command(Command{v});
  return v;
}

std::vector<Json> SimSession::step() {
  std::vector<Json> events;
  if (paused_) return events;
  const Observation obs = env_.observation();
  const ActionVector action = controller_.act(env_, obs);
  last_reward_ = env_.step(action).reward;
  ++steps_;
  const WorldState& w = env_.world();
  if (monitor_) {
    const TaskStatus& st = monitor_->update(w, elapsed());
    if (st.result != TaskResult::kRunning) {
      events.push_back(protocol::make_task_event(scenario_, st));
      paused_ = true;  // hold the final frame until the operator resets
    }
    return events;
  }
  const double half = env_cfg_.arena_half_size;
  if (std::abs(w.ball.position.x) > half || std::abs(w.ball.position.y) > half) {
    events.push_back(protocol::make_episode_end_event(scenario_, "out_of_bounds", elapsed()));
  } else if (norm(w.ball.position - w.robot.position) > env_cfg_.d_lost) {
    events.push_back(protocol::make_episode_end_event(scenario_, "ball_lost", elapsed()));
  }
  if (!events.empty()) reset(scenario_);
  return events;
}

protocol::StateSnapshot SimSession::snapshot() const {
  protocol::StateSnapshot s;
  s.t = elapsed();
  s.paused = paused_;
  s.scenario = scenario_;
  s.world = env_.world();
  s.fov = fov_polygon(env_.camera(), s.world.robot);
  s.ball_visible = env_.tracker().observation().visible;
  s.command = command_;
  s.reward = last_reward_;
  if (monitor_) {
    s.task = monitor_->status();
    s.task_spec = monitor_->spec();
  }
  return s;
}

// ---- networking -------------------------------------------------------------------------------

namespace {

struct Outgoing {
  std::shared_ptr<const std::string> text;
  bool droppable = false;  // state messages may be skipped for slow clients
};

class WsSession;

}  // namespace

struct Server::Impl {
  net::io_context ioc{1};
  std::optional<tcp::acceptor> acceptor;
  std::optional<net::signal_set> signals;

  // Owned by the network thread.
  std::map<std::uint64_t, std::shared_ptr<WsSession>> sessions;
  std::optional<std::uint64_t> controller_id;
  std::uint64_t next_id = 1;

  // Shared with the simulation thread.
  std::atomic<bool> controller_connected{false};
  std::atomic<std::int64_t> controller_left_ns{0};
  std::atomic<int> scenario{0};
  std::mutex inbox_mu;
  std::optional<Vec2> pending_command;
  std::vector<protocol::ClientMessage> pending_ops;

  std::mutex done_mu;
  std::condition_variable done_cv;
  bool done = false;

  std::size_t max_queue = 64;
  double dt = 0.02;
  double stream_hz = 25.0;
  double v_cmd_max = 1.5;

  void accept_next();
  void on_open(const std::shared_ptr<WsSession>& s);
  void on_close(std::uint64_t id);
  void on_message(std::uint64_t id, const std::string& text);
  void broadcast(std::shared_ptr<const std::string> text, bool droppable);
};

namespace {

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, Server::Impl& server, std::uint64_t id)
      : ws_(std::move(socket)), server_(server), id_(id) {}

  std::uint64_t id() const { return id_; }
  protocol::Role role = protocol::Role::kSpectator;

  void run() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(64 * 1024);
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->open_ = true;
      self->server_.on_open(self);
      self->read();
    });
  }

  // Network thread only.
  void send(Outgoing msg) {
    if (!open_) return;
    if (msg.droppable && queue_.size() >= server_.max_queue) return;
    queue_.push_back(std::move(msg));
    if (queue_.size() == 1) write();
  }

  void close() {
    if (!open_) return;
    open_ = false;
    ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {});
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->finish();
        return;
      }
      if (!self->ws_.got_text()) {
        self->buffer_.consume(self->buffer_.size());
        self->send({std::make_shared<const std::string>(protocol::make_error("binary frames are not supported").dump()), false});
      } else {
        const std::string text = beast::buffers_to_string(self->buffer_.data());
        self->buffer_.consume(self->buffer_.size());
        self->server_.on_message(self->id_, text);
      }
      self->read();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front().text), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec || self->closed_) {
        self->finish();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write();
    });
  }

  void finish() {
    if (closed_) return;
    closed_ = true;
    open_ = false;
    server_.on_close(id_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  Server::Impl& server_;
  std::uint64_t id_;
  beast::flat_buffer buffer_;
  std::deque<Outgoing> queue_;
  bool open_ = false;
  bool closed_ = false;
};

}  // namespace

void Server::Impl::accept_next() {
  acceptor->async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    auto s = std::make_shared<WsSession>(std::move(socket), *this, next_id++);
    s->run();
    accept_next();
  });
}

void Server::Impl::on_open(const std::shared_ptr<WsSession>& s) {
  sessions[s->id()] = s;
  if (!controller_id) {
    controller_id = s->id();
    s->role = protocol::Role::kController;
    controller_connected = true;
  }
  protocol::HelloInfo info;
  info.role = s->role;
  info.dt = dt;
  info.stream_hz = stream_hz;
  info.v_cmd_max = v_cmd_max;
  info.scenario = static_cast<Scenario>(scenario.load());
  s->send({std::make_shared<const std::string>(protocol::make_hello(info).dump()), false});
}

void Server::Impl::on_close(std::uint64_t id) {
  sessions.erase(id);
  if (controller_id == id) {
    controller_id.reset();
    controller_left_ns = now_ns();
    controller_connected = false;
  }
}

void Server::Impl::on_message(std::uint64_t id, const std::string& text) {
  auto it = sessions.find(id);
  if (it == sessions.end()) return;
  auto reply_error = [&](std::string_view m) {
    it->second->send({std::make_shared<const std::string>(protocol::make_error(m).dump()), false});
  };
  auto parsed = protocol::parse_client_message(text);
  if (auto* err = std::get_if<std::string>(&parsed)) {
    reply_error(*err);
    return;
  }
  if (it->second->role != protocol::Role::kController) {
    reply_error("read-only spectator connection: another client is in control");
    return;
  }
  auto& msg = std::get<protocol::ClientMessage>(parsed);
  std::lock_guard lock(inbox_mu);
  if (auto* c = std::get_if<protocol::CommandMsg>(&msg)) {
    pending_command = Vec2{c->vx, c->vy};  // latest wins
  } else {
    pending_ops.push_back(msg);
  }
}

void Server::Impl::broadcast(std::shared_ptr<const std::string> text, bool droppable) {
  net::post(ioc, [this, text = std::move(text), droppable] {
    for (auto& [id, s] : sessions) s->send({text, droppable});
  });
}

Server::Server(const EnvConfig& env_cfg, Controller& controller, ServeOptions options)
    : impl_(std::make_unique<Impl>()), env_cfg_(env_cfg), controller_(controller), options_(std::move(options)) {
  if (!(options_.stream_hz > 0.0)) throw ConfigError("serve: stream_hz must be positive");
  if (!(options_.disconnect_grace >= 0.0)) throw ConfigError("serve: disconnect_grace must be non-negative");
  env_cfg_.validate();
  impl_->max_queue = options_.max_queued_messages;
  impl_->dt = env_cfg_.dt;
  impl_->stream_hz = options_.stream_hz;
  impl_->v_cmd_max = env_cfg_.command.v_cmd_max;
  impl_->scenario = static_cast<int>(options_.scenario);
}

Server::~Server() {
  stop();
  if (net_thread_.joinable()) net_thread_.join();
  if (sim_thread_.joinable()) sim_thread_.join();
}

void Server::start() {
  const auto addr = net::ip::make_address(options_.bind_address);
  tcp::endpoint endpoint(addr, options_.port);
  auto& acc = impl_->acceptor.emplace(impl_->ioc);
  beast::error_code ec;
  acc.open(endpoint.protocol(), ec);
  if (!ec) acc.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acc.bind(endpoint, ec);
  if (!ec) acc.listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw std::runtime_error("serve: cannot listen on " + options_.bind_address + ":" + std::to_string(options_.port) + ": " + ec.message());
  bound_port_ = acc.local_endpoint().port();
  impl_->controller_left_ns = now_ns();
  impl_->accept_next();
  net_thread_ = std::thread([this] { impl_->ioc.run(); });
  sim_thread_ = std::thread([this] { sim_loop(); });
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  net::post(impl_->ioc, [impl = impl_.get()] {
    beast::error_code ec;
    if (impl->acceptor) impl->acceptor->close(ec);
    if (impl->signals) impl->signals->cancel(ec);
    for (auto& [id, s] : impl->sessions) s->close();
    // Give close frames a moment, then stop the loop.
    auto timer = std::make_shared<net::steady_timer>(impl->ioc, std::chrono::milliseconds(200));
    timer->async_wait([impl, timer](beast::error_code) { impl->ioc.stop(); });
  });
  {
    std::lock_guard lock(impl_->done_mu);
    impl_->done = true;
  }
  impl_->done_cv.notify_all();
}

void Server::wait(bool handle_signals) {
  if (handle_signals) {
    std::promise<void> armed;
    net::post(impl_->ioc, [this, &armed] {
      impl_->signals.emplace(impl_->ioc, SIGINT, SIGTERM);
      impl_->signals->async_wait([this](beast::error_code ec, int) {
        if (!ec) stop();
      });
      armed.set_value();
    });
    armed.get_future().wait();
  }
  std::unique_lock lock(impl_->done_mu);
  impl_->done_cv.wait(lock, [&] { return impl_->done; });
  lock.unlock();
  if (sim_thread_.joinable()) sim_thread_.join();
  if (net_thread_.joinable()) net_thread_.join();
}

void Server::sim_loop() {
  using clock = std::chrono::steady_clock;
  SimSession sim(env_cfg_, controller_, options_.seed, options_.scenario);
  const double dt = env_cfg_.dt;
  const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(dt));
  const auto stream_period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / options_.stream_hz));
  const auto grace_ns = static_cast<std::int64_t>(options_.disconnect_grace * 1e9);
  bool auto_paused = false;
  std::uint64_t seq = 0;
  auto next_step = clock::now();
  auto next_stream = next_step;

  auto send_json = [&](const Json& j, bool droppable) {
    impl_->broadcast(std::make_shared<const std::string>(j.dump()), droppable);
  };

  while (!stopping_) {
    std::optional<Vec2> cmd;
    std::vector<protocol::ClientMessage> ops;
    {
      std::lock_guard lock(impl_->inbox_mu);
      cmd = std::exchange(impl_->pending_command, std::nullopt);
      ops.swap(impl_->pending_ops);
    }
    if (cmd) sim.set_command(*cmd);
    for (const auto& op : ops) {
      if (auto* r = std::get_if<protocol::ResetMsg>(&op)) {
        sim.reset(r->scenario);
        impl_->scenario = static_cast<int>(r->scenario);
        auto_paused = false;
      } else if (std::holds_alternative<protocol::PauseMsg>(op)) {
        sim.set_paused(true);
        auto_paused = false;
      } else if (std::holds_alternative<protocol::ResumeMsg>(op)) {
        sim.set_paused(false);
        auto_paused = false;
      }
    }

    const bool connected = impl_->controller_connected;
    if (!connected && !sim.paused() && now_ns() - impl_->controller_left_ns.load() > grace_ns) {
      sim.set_paused(true);
      auto_paused = true;
    } else if (connected && auto_paused) {
      sim.set_paused(false);
      auto_paused = false;
    }

    const bool stepping = !sim.paused();
    try {
      for (const Json& ev : sim.step()) send_json(ev, false);
    } catch (const std::exception& e) {
      send_json(protocol::make_error(std::string("simulation fault, scenario reset: ") + e.what()), false);
      sim.reset(sim.scenario());
    }
    if (stepping && step_hook_) step_hook_(sim.elapsed(), sim.command());

    next_step += period;
    if (clock::now() >= next_stream) {
      protocol::StateSnapshot snap = sim.snapshot();
      snap.seq = seq++;
      send_json(protocol::make_state(snap), true);
      next_stream += stream_period;
    }
    const auto now = clock::now();
    if (now - next_step > std::chrono::milliseconds(500)) {
      // Far behind (suspended process, debugger): drop the backlog instead of fast-forwarding.
      next_step = now;
      next_stream = now;
    }
    std::this_thread::sleep_until(next_step);
  }
}

}  // namespace dribble
