#pragma once

// The bank daemon: accepts concurrent connections and serves certificate
// fetches (M8), authentications (M9) and authorization requests. Bank state
// mutations are serialized inside Bank; each connection only tracks which
// users it has successfully authenticated, so an authorization request on a
// connection that never authenticated that user is refused.

#include <atomic>
#include <thread>
#include <vector>

#include "sfamss/protocol.hpp"
#include "sfamss/transport.hpp"

namespace sfamss {

class BankServer {
 public:
  BankServer(Bank& bank, std::uint16_t port, Clock clock)
      : bank_(bank), clock_(std::move(clock)), requested_port_(port) {}

  ~BankServer() { stop(); }

  void start() {
    listener_ = TcpListener::bind_loopback(requested_port_);
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  void stop() {
    if (!running_.exchange(false)) return;
    listener_.close();
    if (accept_thread_.joinable()) accept_thread_.join();
    std::lock_guard lock(workers_mu_);
    for (auto& t : workers_)
      if (t.joinable()) t.join();
    workers_.clear();
  }

  std::uint16_t port() const { return listener_.port(); }

 private:
  void accept_loop() {
    while (running_) {
      TcpStream conn;
      try {
        conn = listener_.accept();
      } catch (const TransportError&) {
        break;  // listener closed
      }
      std::lock_guard lock(workers_mu_);
      workers_.emplace_back(
          [this](TcpStream s) { serve_connection(std::move(s)); }, std::move(conn));
    }
  }

  void serve_connection(TcpStream conn) {
    std::set<std::uint64_t> authenticated;
    conn.set_recv_timeout(30'000);
    for (;;) {
      Bytes frame;
      try {
        frame = conn.recv_frame();
      } catch (const TransportError&) {
        return;  // closed, timed out or hostile framing
      }

      Message msg;
      try {
        msg = decode(frame);
      } catch (const CodecException&) {
        return;  // malformed peers get disconnected, never crashes
      }

      try {
        if (const auto* m8 = std::get_if<M8CertFetch>(&msg)) {
          if (!bank_.has_user(m8->user_id)) return;  // nothing truthful to reply
          M8RCertFetchReply reply{bank_.user_certificate(m8->user_id)};
          conn.send_frame(encode(Message{reply}));
        } else if (const auto* m9 = std::get_if<M9BankAuthRequest>(&msg)) {
          M10AuthDecision m10 = bank_.authenticate(*m9, clock_());
          if (m10.accepted()) authenticated.insert(m10.user_id.value);
          conn.send_frame(encode(Message{m10}));
        } else if (const auto* rq = std::get_if<AuthzRequest>(&msg)) {
          AuthzDecision d = bank_.authorize(*rq, authenticated.count(rq->user_id.value) != 0);
          conn.send_frame(encode(Message{d}));
        } else {
          return;  // not a request the bank answers
        }
      } catch (const TransportError&) {
        return;
      }
    }
  }

  Bank& bank_;
  Clock clock_;
  std::uint16_t requested_port_;
  TcpListener listener_;
  std::thread accept_thread_;
  std::mutex workers_mu_;
  std::vector<std::thread> workers_;
  std::atomic<bool> running_{false};
};

}  // namespace sfamss
