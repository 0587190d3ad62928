#pragma once

// Framed transport over TCP: 4-byte big-endian length prefix, then the frame
// bytes. The length is validated against the 1 MiB cap before any buffer is
// allocated, so a hostile length prefix cannot exhaust memory.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <string>

#include "sfamss/bytes.hpp"

namespace sfamss {

struct TransportError : std::runtime_error {
  enum class Kind { PeerClosed, FrameTooLarge, Timeout, ConnectFailed, PortInUse, IoError };
  Kind kind;
  TransportError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}
};

class TcpStream {
 public:
  TcpStream() = default;
  explicit TcpStream(int fd) : fd_(fd) {}

  TcpStream(TcpStream&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  TcpStream& operator=(TcpStream&& other) noexcept {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
    return *this;
  }
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;
  ~TcpStream() { close(); }

  static TcpStream connect(const std::string& host, std::uint16_t port,
                           int timeout_ms = 5000) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError(TransportError::Kind::IoError, "socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd);
      throw TransportError(TransportError::Kind::ConnectFailed, "bad address " + host);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      ::close(fd);
      throw TransportError(TransportError::Kind::ConnectFailed,
                           "cannot connect to " + host + ":" + std::to_string(port));
    }
    TcpStream s(fd);
    s.set_recv_timeout(timeout_ms);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return s;
  }

  void set_recv_timeout(int timeout_ms) {
    timeval tv{};
    tv.tv_sec = timeout_ms / 1000;
    tv.tv_usec = (timeout_ms % 1000) * 1000;
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  }

  void send_frame(ByteView frame) {
    if (frame.size() > kMaxFrameBytes)
      throw TransportError(TransportError::Kind::FrameTooLarge, "frame exceeds 1 MiB");
    std::uint8_t len[4];
    std::uint32_t n = static_cast<std::uint32_t>(frame.size());
    len[0] = static_cast<std::uint8_t>(n >> 24);
    len[1] = static_cast<std::uint8_t>(n >> 16);
    len[2] = static_cast<std::uint8_t>(n >> 8);
    len[3] = static_cast<std::uint8_t>(n);
    send_all(len, 4);
    send_all(frame.data(), frame.size());
  }

  Bytes recv_frame() {
    std::uint8_t len[4];
    recv_all(len, 4);
    std::uint32_t n = (std::uint32_t(len[0]) << 24) | (std::uint32_t(len[1]) << 16) |
                      (std::uint32_t(len[2]) << 8) | len[3];
    if (n > kMaxFrameBytes)
      throw TransportError(TransportError::Kind::FrameTooLarge,
                           "peer announced oversize frame");
    Bytes frame(n);
    if (n > 0) recv_all(frame.data(), n);
    return frame;
  }

  bool valid() const { return fd_ >= 0; }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  void send_all(const std::uint8_t* data, std::size_t n) {
    std::size_t off = 0;
    while (off < n) {
      ssize_t sent = ::send(fd_, data + off, n - off, MSG_NOSIGNAL);
      if (sent <= 0) throw TransportError(TransportError::Kind::PeerClosed, "send failed");
      off += static_cast<std::size_t>(sent);
    }
  }

  void recv_all(std::uint8_t* data, std::size_t n) {
    std::size_t off = 0;
    while (off < n) {
      ssize_t got = ::recv(fd_, data + off, n - off, 0);
      if (got == 0) throw TransportError(TransportError::Kind::PeerClosed, "peer closed");
      if (got < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK)
          throw TransportError(TransportError::Kind::Timeout, "recv timed out");
        throw TransportError(TransportError::Kind::IoError, "recv failed");
      }
      off += static_cast<std::size_t>(got);
    }
  }

  int fd_ = -1;
};

class TcpListener {
 public:
  TcpListener() = default;

  // port 0 binds an ephemeral port; port() reports the actual one.
  static TcpListener bind_loopback(std::uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError(TransportError::Kind::IoError, "socket() failed");
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      int err = errno;
      ::close(fd);
      if (err == EADDRINUSE)
        throw TransportError(TransportError::Kind::PortInUse,
                             "port " + std::to_string(port) + " is in use");
      throw TransportError(TransportError::Kind::IoError, "bind failed");
    }
    if (::listen(fd, 16) != 0) {
      ::close(fd);
      throw TransportError(TransportError::Kind::IoError, "listen failed");
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    TcpListener l;
    l.fd_ = fd;
    l.port_ = ntohs(addr.sin_port);
    return l;
  }

  TcpListener(TcpListener&& other) noexcept : fd_(other.fd_), port_(other.port_) {
    other.fd_ = -1;
  }
  TcpListener& operator=(TcpListener&& other) noexcept {
    close();
    fd_ = other.fd_;
    port_ = other.port_;
    other.fd_ = -1;
    return *this;
  }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;
  ~TcpListener() { close(); }

  std::uint16_t port() const { return port_; }

  TcpStream accept() {
    int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) throw TransportError(TransportError::Kind::PeerClosed, "listener closed");
    return TcpStream(fd);
  }

  // Unblocks any accept() in progress.
  void close() {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

  bool valid() const { return fd_ >= 0; }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace sfamss
