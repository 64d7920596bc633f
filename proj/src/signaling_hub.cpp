#include "tilecast/signaling_hub.hpp"

#include <spdlog/spdlog.h>

#include "tilecast/errors.hpp"

namespace tilecast::signaling {

std::string state_key(const std::string& uuid) { return "state:" + uuid; }
std::string stream_key(const std::string& uuid) { return "stream:" + uuid; }
std::string name_key(const std::string& uuid) { return "name:" + uuid; }

Hub::Hub(HubConfig config, Store& store, KvCache& cache, Clock::time_point now)
    : config_(config), store_(store), cache_(cache) {
  const auto grace = config_.heartbeat_interval * config_.stale_after_beats;
  for (const auto& [key, value] : cache_.scan("state:"))
    if (value != to_string(UserState::offline)) restored_[key.substr(6)] = now + grace;
}

void Hub::flush(Outbox& out) {
  for (auto& o : out) {
    try {
      o.conn->send_text(o.text);
      if (o.close_after) o.conn->close();
    } catch (const std::exception& e) {
      spdlog::debug("signaling: send failed: {}", e.what());
    }
  }
}

Hub::ConnId Hub::on_connect(std::shared_ptr<Connection> conn, Clock::time_point now) {
  std::lock_guard lock(mutex_);
  const ConnId id = next_id_++;
  peers_[id] = Peer{std::move(conn), {}, now};
  return id;
}

void Hub::on_text(ConnId id, const std::string& text, Clock::time_point now) {
  Outbox out;
  {
    std::lock_guard lock(mutex_);
    const auto it = peers_.find(id);
    if (it == peers_.end()) return;
    Peer& peer = it->second;
    peer.last_seen = now;
    if (peer.uuid.empty()) {
      register_peer(id, peer, text, out);
    } else {
      try {
        const SignalMessage msg = SignalMessage::parse(text);
        if (msg.heartbeat) {
          if (!msg.user_state) throw SignalError("heartbeat without UserState");
          set_state(peer.uuid, *msg.user_state);
          if (!msg.stream_address.empty()) cache_.set(stream_key(peer.uuid), msg.stream_address);
          SignalMessage echo = msg;
          echo.response_code = 200;
          out.push_back({peer.conn, echo.to_json()});
        } else if (msg.calling) {
          handle_call(peer, msg, out, now);
        } else if (msg.called) {
          handle_call_response(peer, msg, out);
        } else if (msg.user_state) {
          set_state(peer.uuid, *msg.user_state);  // plain state update
        }
      } catch (const SignalError& e) {
        out.push_back({peer.conn, error_frame(400, e.what())});
      }
    }
  }
  flush(out);
}

void Hub::register_peer(ConnId id, Peer& peer, const std::string& text, Outbox& out) {
  std::string uuid = text;
  while (!uuid.empty() && std::isspace(static_cast<unsigned char>(uuid.back()))) uuid.pop_back();
  if (uuid.empty() || uuid.size() > 128 || uuid.front() == '{') {
    out.push_back({peer.conn, error_frame(400, "first frame must carry the client uuid"), true});
    return;
  }
  if (by_uuid_.contains(uuid)) {
    out.push_back({peer.conn, error_frame(409, "uuid already connected"), true});
    return;
  }
  by_uuid_[uuid] = id;
  peer.uuid = uuid;
  restored_.erase(uuid);
  const std::string nickname = cache_.get(name_key(uuid)).value_or(uuid);
  store_.append_net_info(uuid, nickname, peer.conn->peer_ip(), peer.conn->peer_port(), std::string(to_string(UserState::online)));
  set_state(uuid, UserState::online);
  spdlog::info("signaling: {} connected from {}:{}", uuid, peer.conn->peer_ip(), peer.conn->peer_port());
}

void Hub::handle_call(Peer& peer, SignalMessage msg, Outbox& out, Clock::time_point now) {
  if (msg.caller_uuid.empty()) msg.caller_uuid = peer.uuid;
  if (msg.caller_uuid != peer.uuid) {
    out.push_back({peer.conn, error_frame(403, "CallerUUID does not match this connection")});
    return;
  }
  if (msg.callee_uuid.empty() || msg.stream_address.empty()) {
    out.push_back({peer.conn, error_frame(400, "a call needs CalleeUUID and StreamAddress")});
    return;
  }
  if (!by_uuid_.contains(msg.callee_uuid)) {
    out.push_back({peer.conn, error_frame(404, "callee is not connected")});
    return;
  }
  if (msg.callee_uuid == peer.uuid) {
    out.push_back({peer.conn, error_frame(400, "cannot call yourself")});
    return;
  }
  if (state_of(msg.callee_uuid) != UserState::online || calls_.contains({msg.caller_uuid, msg.callee_uuid})) {
    SignalMessage busy = msg;
    busy.response_code = 200;
    busy.call_result = CallResult::standstill;
    out.push_back({peer.conn, busy.to_json()});
    return;
  }
  cache_.set(stream_key(peer.uuid), msg.stream_address);
  msg.calling = false;
  msg.called = true;
  msg.response_code = 200;
  calls_[{msg.caller_uuid, msg.callee_uuid}] = PendingCall{msg, now + config_.call_timeout};
  send_to_uuid(msg.callee_uuid, msg.to_json(), out);
}

void Hub::handle_call_response(Peer& peer, SignalMessage msg, Outbox& out) {
  if (msg.callee_uuid != peer.uuid) {
    out.push_back({peer.conn, error_frame(403, "CalleeUUID does not match this connection")});
    return;
  }
  if (msg.call_result != CallResult::accepted && msg.call_result != CallResult::rejected) {
    out.push_back({peer.conn, error_frame(400, "CallResult must be Accepted or Rejected")});
    return;
  }
  const auto it = calls_.find({msg.caller_uuid, msg.callee_uuid});
  if (it == calls_.end()) return;  // timed out or never placed; the caller already has its answer
  calls_.erase(it);
  msg.calling = true;
  msg.called = false;
  msg.response_code = 200;
  if (msg.call_result == CallResult::accepted) {
    set_state(msg.caller_uuid, UserState::chatting);
    set_state(msg.callee_uuid, UserState::chatting);
    chatting_with_[msg.caller_uuid] = msg.callee_uuid;
    chatting_with_[msg.callee_uuid] = msg.caller_uuid;
  } else {
    set_state(msg.caller_uuid, UserState::online);
    set_state(msg.callee_uuid, UserState::online);
  }
  send_to_uuid(msg.caller_uuid, msg.to_json(), out);
}

void Hub::send_to_uuid(const std::string& uuid, const std::string& text, Outbox& out) {
  const auto it = by_uuid_.find(uuid);
  if (it == by_uuid_.end()) return;
  out.push_back({peers_.at(it->second).conn, text});
}

void Hub::set_state(const std::string& uuid, UserState s) { cache_.set(state_key(uuid), std::string(to_string(s))); }

void Hub::on_disconnect(ConnId id, Clock::time_point) {
  Outbox out;
  {
    std::lock_guard lock(mutex_);
    drop_peer(id, out);
  }
  flush(out);
}

void Hub::drop_peer(ConnId id, Outbox& out) {
  const auto it = peers_.find(id);
  if (it == peers_.end()) return;
  Peer peer = std::move(it->second);
  peers_.erase(it);
  if (peer.uuid.empty()) return;
  by_uuid_.erase(peer.uuid);

  for (auto c = calls_.begin(); c != calls_.end();) {
    const auto& [caller, callee] = c->first;
    if (caller == peer.uuid || callee == peer.uuid) {
      SignalMessage m = c->second.request;
      m.call_result = CallResult::standstill;
      if (caller == peer.uuid) {
        send_to_uuid(callee, m.to_json(), out);
      } else {
        m.calling = true;
        m.called = false;
        send_to_uuid(caller, m.to_json(), out);
      }
      c = calls_.erase(c);
    } else {
      ++c;
    }
  }
  if (const auto chat = chatting_with_.find(peer.uuid); chat != chatting_with_.end()) {
    const std::string other = chat->second;
    chatting_with_.erase(chat);
    chatting_with_.erase(other);
    SignalMessage m;
    m.response_code = 200;
    m.call_result = CallResult::standstill;
    m.caller_uuid = peer.uuid;
    m.callee_uuid = other;
    send_to_uuid(other, m.to_json(), out);
    if (by_uuid_.contains(other)) set_state(other, UserState::online);
  }

  set_state(peer.uuid, UserState::offline);
  const std::string nickname = cache_.get(name_key(peer.uuid)).value_or(peer.uuid);
  store_.append_net_info(peer.uuid, nickname, peer.conn->peer_ip(), peer.conn->peer_port(),
                         std::string(to_string(UserState::offline)));
  spdlog::info("signaling: {} disconnected", peer.uuid);
}

void Hub::tick(Clock::time_point now) {
  Outbox out;
  std::vector<std::shared_ptr<Connection>> to_close;
  {
    std::lock_guard lock(mutex_);
    for (auto c = calls_.begin(); c != calls_.end();) {
      if (now < c->second.deadline) {
        ++c;
        continue;
      }
      SignalMessage m = c->second.request;
      m.call_result = CallResult::standstill;
      send_to_uuid(m.callee_uuid, m.to_json(), out);  // dismiss the prompt
      m.calling = true;
      m.called = false;
      send_to_uuid(m.caller_uuid, m.to_json(), out);
      c = calls_.erase(c);
    }

    const auto stale = config_.heartbeat_interval * config_.stale_after_beats;
    std::vector<ConnId> dead;
    for (const auto& [id, peer] : peers_)
      if (now - peer.last_seen > stale) dead.push_back(id);
    for (ConnId id : dead) {
      to_close.push_back(peers_.at(id).conn);
      drop_peer(id, out);
    }

    for (auto r = restored_.begin(); r != restored_.end();) {
      if (now < r->second) {
        ++r;
        continue;
      }
      // Never reconnected after a restart.
      set_state(r->first, UserState::offline);
      const auto last = store_.current_net_info(r->first);
      store_.append_net_info(r->first, last ? last->name : r->first, last ? last->ip : "", last ? last->port : 0,
                             std::string(to_string(UserState::offline)));
      r = restored_.erase(r);
    }
  }
  flush(out);
  for (auto& c : to_close) c->close();
}

std::vector<OnlineUser> online_users(const KvCache& cache) {
  std::vector<OnlineUser> out;
  for (const auto& [key, state] : cache.scan("state:")) {
    if (state == to_string(UserState::offline)) continue;
    const std::string uuid = key.substr(6);
    out.push_back({cache.get(name_key(uuid)).value_or(uuid), uuid, cache.get(stream_key(uuid)).value_or(""), state});
  }
  return out;
}

std::vector<OnlineUser> Hub::online() const { return online_users(cache_); }

std::optional<UserState> Hub::state_of(const std::string& uuid) const {
  const auto v = cache_.get(state_key(uuid));
  if (!v) return std::nullopt;
  return parse_user_state(*v);
}

bool Hub::registered(const std::string& uuid) const {
  std::lock_guard lock(mutex_);
  return by_uuid_.contains(uuid);
}

std::size_t Hub::pending_calls() const {
  std::lock_guard lock(mutex_);
  return calls_.size();
}

}  // namespace tilecast::signaling
